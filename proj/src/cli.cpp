/* Copyright 2026 The APT Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "apt/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "apt/checkpoint.hpp"
#include "json.hpp"

namespace apt {

using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string read_text(const path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + file.string());
  out << text;
}

template <typename T>
T config_value(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("config key '" + key + "' has the wrong type");
  }
}

}  // namespace

RunOverrides parse_run_config(const std::string& text) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed config: ") + e.what());
  }
  if (!obj.is_object()) throw std::invalid_argument("config is not a JSON object");
  RunOverrides o;
  for (const auto& [key, v] : obj.items()) {
    auto count = [&] {
      if (!v.is_number_unsigned()) {
        throw std::invalid_argument("config key '" + key + "' must be a non-negative integer");
      }
      return v.get<std::size_t>();
    };
    auto real = [&] {
      if (!v.is_number()) throw std::invalid_argument("config key '" + key + "' must be a number");
      return v.get<double>();
    };
    if (key == "seed") {
      if (!v.is_number_unsigned()) throw std::invalid_argument("config key 'seed' must be a non-negative integer");
      o.seed = v.get<std::uint64_t>();
    } else if (key == "epochs") {
      o.epochs = count();
    } else if (key == "batch_size") {
      o.batch_size = count();
    } else if (key == "learning_rate") {
      o.learning_rate = real();
    } else if (key == "momentum") {
      o.momentum = real();
    } else if (key == "weight_decay") {
      o.weight_decay = real();
    } else if (key == "tau") {
      o.tau = real();
    } else if (key == "fusion") {
      o.fusion = config_value<std::string>(v, key);
    } else if (key == "tuning") {
      o.tuning = config_value<std::string>(v, key);
    } else if (key == "share_weights") {
      o.share_weights = config_value<bool>(v, key);
    } else if (key == "apt_layers") {
      o.apt_layers = count();
    } else if (key == "reduction") {
      o.reduction = count();
    } else if (key == "use_ocr") {
      o.use_ocr = config_value<bool>(v, key);
    } else if (key == "use_vision") {
      o.use_vision = config_value<bool>(v, key);
    } else if (key == "link_metric") {
      o.link_metric = config_value<std::string>(v, key);
    } else if (key == "link_threshold") {
      o.link_threshold = real();
    } else if (key == "description") {
      o.description = config_value<std::string>(v, key);
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }
  return o;
}

RunOverrides read_run_config(const path& file) {
  return parse_run_config(read_text(file));
}

void apply(const RunOverrides& o, RunSettings& s) {
  TrainConfig& t = s.train;
  if (o.seed) t.seed = *o.seed;
  if (o.epochs) t.epochs = *o.epochs;
  if (o.batch_size) t.batch_size = *o.batch_size;
  if (o.learning_rate) t.learning_rate = *o.learning_rate;
  if (o.momentum) t.momentum = *o.momentum;
  if (o.weight_decay) t.weight_decay = *o.weight_decay;
  if (o.tau) t.head.tau = *o.tau;
  if (o.fusion) t.head.fusion = parse_fusion(*o.fusion);
  if (o.tuning) t.head.tuning = parse_tuning(*o.tuning);
  if (o.share_weights) t.head.share_weights = *o.share_weights;
  if (o.apt_layers) t.apt_layers = *o.apt_layers;
  if (o.reduction) t.reduction = *o.reduction;
  if (o.use_ocr) t.head.use_ocr = *o.use_ocr;
  if (o.use_vision) t.head.use_vision = *o.use_vision;
  if (o.link_metric) s.link.metric = parse_overlap_metric(*o.link_metric);
  if (o.link_threshold) s.link.threshold = *o.link_threshold;
  if (o.description) s.description = parse_description_mode(*o.description);
}

RunSettings resolve_settings(const std::optional<path>& config_file,
                             const RunOverrides& flags) {
  RunSettings s;
  if (config_file) apply(read_run_config(*config_file), s);
  apply(flags, s);
  validate(s.train);
  return s;
}

std::string describe(const RunSettings& s) {
  const TrainConfig& t = s.train;
  std::ostringstream out;
  out << "learning_rate " << num(t.learning_rate) << '\n'
      << "momentum " << num(t.momentum) << '\n'
      << "weight_decay " << num(t.weight_decay) << '\n'
      << "batch_size " << t.batch_size << '\n'
      << "epochs " << t.epochs << '\n'
      << "seed " << t.seed << '\n'
      << "tau " << num(t.head.tau) << '\n'
      << "fusion " << to_string(t.head.fusion) << '\n'
      << "tuning " << to_string(t.head.tuning) << '\n'
      << "share_weights " << (t.head.share_weights ? "true" : "false") << '\n'
      << "use_ocr " << (t.head.use_ocr ? "true" : "false") << '\n'
      << "use_vision " << (t.head.use_vision ? "true" : "false") << '\n'
      << "apt_layers " << t.apt_layers << '\n'
      << "reduction " << t.reduction << '\n'
      << "link_metric " << to_string(s.link.metric) << '\n'
      << "link_threshold " << num(s.link.threshold) << '\n'
      << "description "
      << (s.description == DescriptionMode::kConcat ? "concat" : "average") << '\n';
  return out.str();
}

PreparedData prepare_data(std::vector<ScreenAnnotation> train_screens,
                          std::vector<ScreenAnnotation> val_screens,
                          const EmbeddingStore& store, const CategorySet& categories,
                          const RunSettings& settings) {
  ensure_linked(train_screens, settings.link.threshold, settings.link.metric);
  ensure_linked(val_screens, settings.link.threshold, settings.link.metric);
  require_empty_word(store);

  std::vector<std::string> missing;
  auto build = [&](const std::vector<ScreenAnnotation>& screens) {
    try {
      return build_proposals(screens, store, categories, settings.description);
    } catch (const MissingKeysError& e) {
      missing.insert(missing.end(), e.keys().begin(), e.keys().end());
      return ProposalSet{};
    }
  };
  ProposalSet train = build(train_screens);
  ProposalSet val = build(val_screens);
  CategoryPrompts all_prompts;
  try {
    all_prompts = load_prompts(store, categories);
  } catch (const MissingKeysError& e) {
    missing.insert(missing.end(), e.keys().begin(), e.keys().end());
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    throw MissingKeysError(std::move(missing));
  }

  PreparedData out;
  out.categories = categories;
  out.train_categories = categories.indices(CategorySplit::kNovel).empty()
                             ? categories.all_indices()
                             : categories.indices(CategorySplit::kBase);
  out.prompts = all_prompts.subset(out.train_categories);
  out.train = train.restrict_to(out.train_categories);
  out.val = val.restrict_to(out.train_categories);
  return out;
}

PreparedData prepare_synthetic(const SynthConfig& cfg, const RunSettings& settings) {
  SynthDataset ds = generate(cfg);
  return prepare_data(std::move(ds.train), std::move(ds.val), ds.store, ds.categories,
                      settings);
}

std::string format_train_report(const RunSettings& settings, const TrainReport& report) {
  std::ostringstream out;
  out << "# apt train report\n" << describe(settings);
  for (std::size_t e = 0; e < report.epoch_losses.size(); ++e) {
    out << "epoch " << e + 1 << " loss " << num(report.epoch_losses[e]) << '\n';
  }
  out << "val_accuracy " << num(report.val_accuracy) << '\n'
      << "steps " << report.steps << '\n';
  return out.str();
}

namespace {

// Runs a command body, mapping exceptions to exit codes.
template <typename Fn>
int guarded(std::ostream& err, Fn&& body) {
  try {
    return body();
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const MissingKeysError& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

std::vector<double> thresholds_for(double iou_threshold, bool averaged) {
  if (averaged) return averaged_iou_thresholds();
  return {iou_threshold};
}

}  // namespace

int cmd_link(const LinkOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const OverlapMetric metric = parse_overlap_metric(opt.metric);
    auto screens = parse_annotations(opt.annotations);
    std::size_t elements = 0, linked = 0, ocr = 0, assigned = 0;
    for (auto& s : screens) {
      s.links = link_ocr(s.elements, s.ocr, opt.threshold, metric);
      elements += s.elements.size();
      ocr += s.ocr.size();
      for (const auto& m : s.links->matched) {
        if (!m.empty()) ++linked;
        assigned += m.size();
      }
    }
    write_annotations(screens, opt.out);
    out << "metric " << to_string(metric) << '\n'
        << "threshold " << num(opt.threshold) << '\n'
        << "screens " << screens.size() << '\n'
        << "elements " << elements << '\n'
        << "linked_elements " << linked << '\n'
        << "ocr_items " << ocr << '\n'
        << "assigned_ocr " << assigned << '\n'
        << "link_rate "
        << num(elements == 0 ? 0.0 : static_cast<double>(linked) / static_cast<double>(elements))
        << '\n';
    return kExitOk;
  });
}

int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunSettings settings = resolve_settings(opt.config, opt.overrides);
    auto train_screens = parse_annotations(opt.annotations);
    std::vector<ScreenAnnotation> val_screens;
    if (opt.val_annotations) val_screens = parse_annotations(*opt.val_annotations);
    const EmbeddingStore store = read_embeddings(opt.embeddings);
    const CategorySet categories = read_categories(opt.categories);
    const PreparedData data = prepare_data(std::move(train_screens), std::move(val_screens),
                                           store, categories, settings);
    if (data.train.size() < 2) throw std::runtime_error("need at least 2 training proposals");

    const TrainResult result = train(settings.train, data.train.batch, data.prompts,
                                     data.val.size() > 0 ? &data.val.batch : nullptr);
    save_checkpoint(result.head, opt.checkpoint_out);
    const std::string report = format_train_report(settings, result.report);
    if (opt.report_out) write_text(*opt.report_out, report);
    out << report;
    char buf[64];
    std::snprintf(buf, sizeof buf, "wall_seconds %.3f\n", result.report.wall_seconds);
    out << buf;
    return kExitOk;
  });
}

int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const EvalSplit split = parse_split(opt.split);
    const AptHead head = load_checkpoint(opt.checkpoint);
    const EmbeddingStore store = read_embeddings(opt.embeddings);
    if (store.dim() != head.dim()) {
      throw std::invalid_argument("dimension mismatch: checkpoint dim " +
                                  std::to_string(head.dim()) + ", embeddings dim " +
                                  std::to_string(store.dim()));
    }
    const CategorySet categories = read_categories(opt.categories);
    auto screens = parse_annotations(opt.annotations);
    ensure_linked(screens, opt.link.threshold, opt.link.metric);
    require_empty_word(store);
    const ProposalSet proposals = build_proposals(screens, store, categories,
                                                  parse_description_mode(opt.description));
    const CategoryPrompts prompts = load_prompts(store, categories);

    std::vector<std::size_t> subset;
    switch (split) {
      case EvalSplit::kAll:
        subset = categories.all_indices();
        break;
      case EvalSplit::kBase:
        subset = categories.indices(CategorySplit::kBase);
        break;
      case EvalSplit::kNovel:
        subset = categories.indices(CategorySplit::kNovel);
        break;
    }
    if (subset.empty()) throw std::invalid_argument("split '" + opt.split + "' has no categories");

    std::vector<DetectionRecord> dets;
    if (proposals.size() > 0) {
      const auto predictions = classify(head, prompts, proposals.batch, subset);
      for (std::size_t i = 0; i < proposals.size(); ++i) {
        dets.push_back({proposals.image_ids[i], proposals.boxes[i],
                        categories[predictions[i].first].name, predictions[i].second});
      }
    }
    if (opt.detections_out) write_detections(dets, *opt.detections_out);
    const auto gts = ground_truths(screens);
    const auto thresholds = thresholds_for(opt.iou_threshold, opt.averaged);
    const MapReport report = map_report(dets, gts, categories, thresholds, split);
    out << "checkpoint " << opt.checkpoint.string() << '\n'
        << "prompts " << subset.size() << " (" << to_string(split) << ")\n"
        << format_report(report);
    return kExitOk;
  });
}

int cmd_map(const MapOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const EvalSplit split = parse_split(opt.split);
    const auto dets = read_detections(opt.detections);
    const auto screens = parse_annotations(opt.annotations);
    const CategorySet categories = read_categories(opt.categories);
    const auto thresholds = thresholds_for(opt.iou_threshold, opt.averaged);
    out << format_report(map_report(dets, ground_truths(screens), categories, thresholds,
                                    split));
    return kExitOk;
  });
}

int cmd_synth(const SynthOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const SynthDataset ds = generate(opt.config);
    std::filesystem::create_directories(opt.out_dir);
    write_annotations(ds.train, opt.out_dir / "train.jsonl");
    write_annotations(ds.val, opt.out_dir / "val.jsonl");
    write_embeddings(ds.store, opt.out_dir / "embeddings.apte");
    write_categories(ds.categories, opt.out_dir / "categories.txt");
    out << "seed " << opt.config.seed << '\n'
        << "dim " << opt.config.dim << '\n'
        << "categories " << ds.categories.size() << '\n'
        << "train_screens " << ds.train.size() << '\n'
        << "val_screens " << ds.val.size() << '\n'
        << "embeddings " << ds.store.size() << '\n';
    return kExitOk;
  });
}

std::vector<std::string> parse_axes(const std::string& csv) {
  static const std::vector<std::string> known = {"fusion", "tuning", "weights", "layers",
                                                 "components"};
  std::vector<std::string> axes;
  std::stringstream in(csv);
  std::string axis;
  while (std::getline(in, axis, ',')) {
    if (axis.empty()) continue;
    if (std::find(known.begin(), known.end(), axis) == known.end()) {
      throw std::invalid_argument("unknown ablation axis '" + axis + "'");
    }
    if (std::find(axes.begin(), axes.end(), axis) == axes.end()) axes.push_back(axis);
  }
  if (axes.empty()) throw std::invalid_argument("no ablation axes given");
  return axes;
}

std::vector<AblationRow> run_ablation(const PreparedData& data, const RunSettings& settings,
                                      const std::vector<std::string>& axes) {
  auto has = [&](const char* a) {
    return std::find(axes.begin(), axes.end(), a) != axes.end();
  };
  const HeadConfig& base = settings.train.head;
  std::vector<Fusion> fusions = {base.fusion};
  if (has("fusion")) fusions = {Fusion::kSum, Fusion::kMultiply, Fusion::kAttention};
  std::vector<Tuning> tunings = {base.tuning};
  if (has("tuning")) {
    tunings = {Tuning::kPromptBoth, Tuning::kPromptOcrVisVis, Tuning::kPromptVisVisOcr,
               Tuning::kVisBoth};
  }
  std::vector<bool> shares = {base.share_weights};
  if (has("weights")) shares = {true, false};
  std::vector<std::size_t> depths = {settings.train.apt_layers};
  if (has("layers")) depths = {2, 3};
  struct Components {
    const char* name;
    bool ocr, vision;
  };
  std::vector<Components> comps = {{"full", base.use_ocr, base.use_vision}};
  if (base.use_ocr != base.use_vision || !base.use_ocr) {
    comps[0].name = base.use_ocr ? "w/o v" : (base.use_vision ? "w/o o" : "baseline");
  }
  if (has("components")) {
    comps = {{"full", true, true}, {"w/o o", false, true}, {"w/o v", true, false},
             {"baseline", false, false}};
  }

  std::vector<AblationRow> rows;
  for (Fusion f : fusions) {
    for (Tuning t : tunings) {
      for (bool share : shares) {
        for (std::size_t layers : depths) {
          for (const Components& c : comps) {
            TrainConfig cfg = settings.train;
            cfg.head.fusion = f;
            cfg.head.tuning = t;
            cfg.head.share_weights = share;
            cfg.head.use_ocr = c.ocr;
            cfg.head.use_vision = c.vision;
            cfg.apt_layers = layers;
            const TrainResult r = train(cfg, data.train.batch, data.prompts,
                                        data.val.size() > 0 ? &data.val.batch : nullptr);
            AblationRow row;
            row.fusion = to_string(f);
            row.tuning = to_string(t);
            row.weights = share ? "shared" : "individual";
            row.layers = layers;
            row.components = c.name;
            row.val_accuracy = r.report.val_accuracy;
            row.final_loss = r.report.epoch_losses.back();
            rows.push_back(row);
          }
        }
      }
    }
  }
  return rows;
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %-20s %-10s %6s %-10s %9s %10s\n", "fusion",
                "tuning", "weights", "layers", "components", "val_acc", "final_loss");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-10s %-20s %-10s %6zu %-10s %9.4f %10.6f\n",
                  r.fusion.c_str(), r.tuning.c_str(), r.weights.c_str(), r.layers,
                  r.components.c_str(), r.val_accuracy, r.final_loss);
    out << buf;
  }
  for (const auto& r : rows) {
    out << "row\t" << r.fusion << '\t' << r.tuning << '\t' << r.weights << '\t' << r.layers
        << '\t' << r.components << '\t' << num(r.val_accuracy) << '\t' << num(r.final_loss)
        << '\n';
  }
  return out.str();
}

int cmd_ablate(const AblateOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto axes = parse_axes(opt.axes);
    const RunSettings settings = resolve_settings(opt.config, opt.overrides);
    const int given = (opt.annotations ? 1 : 0) + (opt.val_annotations ? 1 : 0) +
                      (opt.embeddings ? 1 : 0) + (opt.categories ? 1 : 0);
    if (given != 0 && given != 4) {
      throw std::invalid_argument(
          "ablate needs --annotations, --val, --embeddings and --categories together");
    }
    PreparedData data;
    if (given == 4) {
      const EmbeddingStore store = read_embeddings(*opt.embeddings);
      data = prepare_data(parse_annotations(*opt.annotations),
                          parse_annotations(*opt.val_annotations), store,
                          read_categories(*opt.categories), settings);
      out << "fixture " << opt.annotations->string() << '\n';
    } else {
      data = prepare_synthetic(opt.fixture, settings);
      out << "fixture synthetic seed " << opt.fixture.seed << '\n';
    }
    if (data.val.size() == 0) throw std::invalid_argument("ablation needs validation proposals");
    out << describe(settings);
    out << format_ablation(run_ablation(data, settings, axes));
    return kExitOk;
  });
}

}  // namespace apt
