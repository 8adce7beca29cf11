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
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "apt/cli.hpp"

namespace {

void add_overrides(CLI::App* cmd, apt::RunOverrides& o) {
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--epochs", o.epochs, "Training epochs");
  cmd->add_option("--batch-size", o.batch_size, "Mini-batch size");
  cmd->add_option("--lr", o.learning_rate, "Learning rate");
  cmd->add_option("--momentum", o.momentum, "SGD momentum");
  cmd->add_option("--weight-decay", o.weight_decay, "Weight decay");
  cmd->add_option("--tau", o.tau, "Softmax temperature");
  cmd->add_option("--fusion", o.fusion, "sum | multiply | attention");
  cmd->add_option("--tuning", o.tuning,
                  "prompt_both | prompt_ocr_vis_vis | prompt_vis_vis_ocr | vis_both");
  cmd->add_option("--share-weights", o.share_weights, "One phi for both modalities");
  cmd->add_option("--layers", o.apt_layers, "Bottlenecks in phi (2 or 3)");
  cmd->add_option("--reduction", o.reduction, "Channel reduction of phi");
  cmd->add_option("--use-ocr", o.use_ocr, "Use the OCR offset");
  cmd->add_option("--use-vision", o.use_vision, "Use the vision offset");
  cmd->add_option("--link-metric", o.link_metric, "iou | iom");
  cmd->add_option("--link-threshold", o.link_threshold, "Linking threshold");
  cmd->add_option("--description", o.description, "concat | average");
}

void add_synth_options(CLI::App* cmd, apt::SynthConfig& c) {
  cmd->add_option("--fixture-seed", c.seed, "Fixture seed")->capture_default_str();
  cmd->add_option("--dim", c.dim, "Embedding dimension")->capture_default_str();
  cmd->add_option("--categories", c.categories, "Number of categories")->capture_default_str();
  cmd->add_option("--n-train", c.n_train, "Training samples per category")->capture_default_str();
  cmd->add_option("--n-val", c.n_val, "Validation samples per category")->capture_default_str();
  cmd->add_option("--vision-noise", c.vision_noise, "Vision noise scale")->capture_default_str();
  cmd->add_option("--ocr-noise", c.ocr_noise, "OCR noise scale")->capture_default_str();
  cmd->add_option("--ocr-signal", c.ocr_signal, "Share of samples identified by OCR")
      ->capture_default_str();
  cmd->add_option("--ambiguity", c.ambiguity, "Near-collinear prompt pairs")
      ->capture_default_str();
  cmd->add_option("--novel", c.novel, "Trailing categories marked novel")->capture_default_str();
  cmd->add_option("--empty-ocr", c.empty_ocr_fraction, "Share of elements without OCR")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive prompt tuning head: link, train, eval, ablate"};
  app.require_subcommand(1);

  apt::LinkOptions link;
  auto* link_cmd = app.add_subcommand("link", "Link OCR items to elements");
  link_cmd->add_option("annotations", link.annotations, "Annotation file")->required();
  link_cmd->add_option("--metric", link.metric, "iou | iom")->capture_default_str();
  link_cmd->add_option("--threshold", link.threshold, "Overlap threshold (strict)")
      ->capture_default_str();
  link_cmd->add_option("--out", link.out, "Linked annotation file")->required();

  apt::TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train the head");
  train_cmd->add_option("annotations", tr.annotations, "Training annotations")->required();
  train_cmd->add_option("embeddings", tr.embeddings, "Embedding file")->required();
  train_cmd->add_option("categories", tr.categories, "Category file")->required();
  train_cmd->add_option("--val", tr.val_annotations, "Validation annotations");
  train_cmd->add_option("--config", tr.config, "JSON config file");
  train_cmd->add_option("--checkpoint-out", tr.checkpoint_out, "Checkpoint path")->required();
  train_cmd->add_option("--report-out", tr.report_out, "Report path");
  add_overrides(train_cmd, tr.overrides);

  apt::EvalOptions ev;
  std::string eval_metric = "iom";
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint as detection mAP");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint path")->required();
  eval_cmd->add_option("annotations", ev.annotations, "Annotations")->required();
  eval_cmd->add_option("embeddings", ev.embeddings, "Embedding file")->required();
  eval_cmd->add_option("categories", ev.categories, "Category file")->required();
  eval_cmd->add_option("--split", ev.split, "all | base | novel")->capture_default_str();
  eval_cmd->add_option("--iou-thr", ev.iou_threshold, "IoU threshold")->capture_default_str();
  eval_cmd->add_flag("--averaged", ev.averaged, "Average AP over IoU 0.50:0.05:0.95");
  eval_cmd->add_option("--detections-out", ev.detections_out, "Write detections");
  eval_cmd->add_option("--link-metric", eval_metric, "iou | iom")->capture_default_str();
  eval_cmd->add_option("--link-threshold", ev.link.threshold, "Linking threshold")
      ->capture_default_str();
  eval_cmd->add_option("--description", ev.description, "concat | average")
      ->capture_default_str();

  apt::MapOptions mp;
  auto* map_cmd = app.add_subcommand("map", "mAP of a detection file");
  map_cmd->add_option("detections", mp.detections, "Detection file")->required();
  map_cmd->add_option("annotations", mp.annotations, "Ground-truth annotations")->required();
  map_cmd->add_option("categories", mp.categories, "Category file")->required();
  map_cmd->add_option("--split", mp.split, "all | base | novel")->capture_default_str();
  map_cmd->add_option("--iou-thr", mp.iou_threshold, "IoU threshold")->capture_default_str();
  map_cmd->add_flag("--averaged", mp.averaged, "Average AP over IoU 0.50:0.05:0.95");

  apt::SynthOptions sy;
  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic fixture");
  synth_cmd->add_option("--out", sy.out_dir, "Output directory")->required();
  add_synth_options(synth_cmd, sy.config);

  apt::AblateOptions ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train variants and compare");
  ablate_cmd->add_option("--axes", ab.axes, "fusion,tuning,weights,layers,components")
      ->capture_default_str();
  ablate_cmd->add_option("--annotations", ab.annotations, "Training annotations");
  ablate_cmd->add_option("--val", ab.val_annotations, "Validation annotations");
  ablate_cmd->add_option("--embeddings", ab.embeddings, "Embedding file");
  ablate_cmd->add_option("--category-file", ab.categories, "Category file");
  ablate_cmd->add_option("--config", ab.config, "JSON config file");
  add_overrides(ablate_cmd, ab.overrides);
  add_synth_options(ablate_cmd, ab.fixture);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : apt::kExitInput;
  }

  if (*link_cmd) return apt::cmd_link(link, std::cout, std::cerr);
  if (*train_cmd) return apt::cmd_train(tr, std::cout, std::cerr);
  if (*eval_cmd) {
    try {
      ev.link.metric = apt::parse_overlap_metric(eval_metric);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return apt::kExitInput;
    }
    return apt::cmd_eval(ev, std::cout, std::cerr);
  }
  if (*map_cmd) return apt::cmd_map(mp, std::cout, std::cerr);
  if (*synth_cmd) return apt::cmd_synth(sy, std::cout, std::cerr);
  if (*ablate_cmd) return apt::cmd_ablate(ab, std::cout, std::cerr);
  return apt::kExitInput;
}
