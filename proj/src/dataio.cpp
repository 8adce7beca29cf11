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
#include "apt/dataio.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "json.hpp"

namespace apt {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const json& require(const json& obj, const char* field, std::size_t line,
                    const std::string& where) {
  if (!obj.is_object() || !obj.contains(field)) {
    throw ParseError(line, "missing field " + where + field);
  }
  return obj.at(field);
}

Box parse_box(const json& v, std::size_t line, const std::string& field,
              int width, int height) {
  if (!v.is_array() || v.size() != 4) {
    throw ParseError(line, "field " + field + ": expected [x1,y1,x2,y2]");
  }
  Box b;
  double* coords[4] = {&b.x1, &b.y1, &b.x2, &b.y2};
  for (int k = 0; k < 4; ++k) {
    if (!v[k].is_number()) {
      throw ParseError(line, "field " + field + ": coordinate not a number");
    }
    *coords[k] = v[k].get<double>();
  }
  try {
    validate(b);
  } catch (const std::invalid_argument& e) {
    throw ParseError(line, "field " + field + ": " + e.what());
  }
  if (b.x1 < 0 || b.y1 < 0 || b.x2 > width || b.y2 > height) {
    throw ParseError(line, "field " + field + ": box outside image bounds");
  }
  return b;
}

std::string get_string(const json& v, std::size_t line,
                       const std::string& field) {
  if (!v.is_string()) throw ParseError(line, "field " + field + ": not a string");
  return v.get<std::string>();
}

json box_json(const Box& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

ScreenAnnotation parse_annotation_line(std::string_view line,
                                       std::size_t line_number) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_number, std::string("malformed record: ") + e.what());
  }
  if (!obj.is_object()) throw ParseError(line_number, "record is not an object");

  ScreenAnnotation s;
  s.image_id = get_string(require(obj, "image_id", line_number, ""),
                          line_number, "image_id");
  for (const char* dim : {"width", "height"}) {
    const json& v = require(obj, dim, line_number, "");
    if (!v.is_number_integer() || v.get<long long>() <= 0) {
      throw ParseError(line_number,
                       std::string("field ") + dim + ": expected positive integer");
    }
  }
  s.width = obj["width"].get<int>();
  s.height = obj["height"].get<int>();

  const json& elements = require(obj, "elements", line_number, "");
  if (!elements.is_array()) throw ParseError(line_number, "field elements: not an array");
  std::size_t described = 0;
  LinkAssignment links;
  for (std::size_t e = 0; e < elements.size(); ++e) {
    const std::string where = "elements[" + std::to_string(e) + "].";
    const json& el = elements[e];
    ElementAnnotation a;
    a.index = e;
    a.box = parse_box(require(el, "bbox", line_number, where), line_number,
                      where + "bbox", s.width, s.height);
    a.category = get_string(require(el, "category", line_number, where),
                            line_number, where + "category");
    if (a.category.empty()) {
      throw ParseError(line_number, "field " + where + "category: empty");
    }
    s.elements.push_back(std::move(a));
    if (el.contains("description")) {
      ++described;
      links.descriptions.push_back(get_string(el["description"], line_number,
                                              where + "description"));
      std::vector<std::size_t> ids;
      if (el.contains("ocr_ids")) {
        for (const json& id : el["ocr_ids"]) {
          if (!id.is_number_unsigned()) {
            throw ParseError(line_number, "field " + where + "ocr_ids: bad index");
          }
          ids.push_back(id.get<std::size_t>());
        }
      }
      links.matched.push_back(std::move(ids));
    }
  }

  const json& ocr = require(obj, "ocr", line_number, "");
  if (!ocr.is_array()) throw ParseError(line_number, "field ocr: not an array");
  for (std::size_t o = 0; o < ocr.size(); ++o) {
    const std::string where = "ocr[" + std::to_string(o) + "].";
    OcrItem item;
    item.index = o;
    item.box = parse_box(require(ocr[o], "bbox", line_number, where),
                         line_number, where + "bbox", s.width, s.height);
    item.text = get_string(require(ocr[o], "text", line_number, where),
                           line_number, where + "text");
    s.ocr.push_back(std::move(item));
  }

  if (described != 0) {
    if (described != s.elements.size()) {
      throw ParseError(line_number,
                       "field elements: description present on some elements only");
    }
    std::vector<bool> used(s.ocr.size(), false);
    for (const auto& ids : links.matched) {
      for (std::size_t id : ids) {
        if (id >= s.ocr.size() || used[id]) {
          throw ParseError(line_number,
                           "field ocr_ids: index out of range or reused");
        }
        used[id] = true;
      }
    }
    s.links = std::move(links);
  }
  return s;
}

std::vector<ScreenAnnotation> parse_annotations_text(std::string_view text) {
  std::vector<ScreenAnnotation> out;
  std::set<std::string> ids;
  std::size_t line_number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_number;
    const std::string line = trim(text.substr(start, end - start));
    if (!line.empty()) {
      ScreenAnnotation s = parse_annotation_line(line, line_number);
      if (!ids.insert(s.image_id).second) {
        throw ParseError(line_number, "duplicate image_id '" + s.image_id + "'");
      }
      out.push_back(std::move(s));
    }
    start = end + 1;
  }
  return out;
}

std::vector<ScreenAnnotation> parse_annotations(
    const std::filesystem::path& path) {
  return parse_annotations_text(read_file(path));
}

std::string serialize_annotation(const ScreenAnnotation& screen) {
  json obj;
  obj["image_id"] = screen.image_id;
  obj["width"] = screen.width;
  obj["height"] = screen.height;
  json elements = json::array();
  for (std::size_t e = 0; e < screen.elements.size(); ++e) {
    json el;
    el["bbox"] = box_json(screen.elements[e].box);
    el["category"] = screen.elements[e].category;
    if (screen.links) {
      el["description"] = screen.links->descriptions[e];
      el["ocr_ids"] = screen.links->matched[e];
    }
    elements.push_back(std::move(el));
  }
  obj["elements"] = std::move(elements);
  json ocr = json::array();
  for (const auto& item : screen.ocr) {
    ocr.push_back({{"bbox", box_json(item.box)}, {"text", item.text}});
  }
  obj["ocr"] = std::move(ocr);
  return obj.dump();
}

void write_annotations(std::span<const ScreenAnnotation> screens,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  for (const auto& s : screens) out << serialize_annotation(s) << '\n';
}

CategorySet::CategorySet(std::vector<Category> categories)
    : categories_(std::move(categories)) {
  std::set<std::string> names;
  bool any_base = false;
  for (const auto& c : categories_) {
    if (c.name.empty()) throw std::invalid_argument("empty category name");
    if (!names.insert(c.name).second) {
      throw std::invalid_argument("duplicate category '" + c.name + "'");
    }
    any_base = any_base || c.split == CategorySplit::kBase;
  }
  if (!any_base) throw std::invalid_argument("category set has no base category");
}

std::optional<std::size_t> CategorySet::find(std::string_view name) const {
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (categories_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t CategorySet::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw std::out_of_range("unknown category '" + std::string(name) + "'");
}

std::vector<std::size_t> CategorySet::indices(CategorySplit split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (categories_[i].split == split) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> CategorySet::all_indices() const {
  std::vector<std::size_t> out(categories_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

CategorySet parse_categories(std::string_view text) {
  std::vector<Category> cats;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_number = 0;
  while (std::getline(in, raw)) {
    ++line_number;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw ParseError(line_number, "expected 'name,base' or 'name,novel'");
    }
    Category c;
    c.name = trim(line.substr(0, comma));
    const std::string split = trim(line.substr(comma + 1));
    if (split == "base") {
      c.split = CategorySplit::kBase;
    } else if (split == "novel") {
      c.split = CategorySplit::kNovel;
    } else {
      throw ParseError(line_number, "unknown split '" + split + "'");
    }
    cats.push_back(std::move(c));
  }
  try {
    return CategorySet(std::move(cats));
  } catch (const std::invalid_argument& e) {
    throw ParseError(line_number, e.what());
  }
}

CategorySet read_categories(const std::filesystem::path& path) {
  return parse_categories(read_file(path));
}

void write_categories(const CategorySet& categories,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  for (const auto& c : categories.categories()) {
    out << c.name << ',' << (c.split == CategorySplit::kBase ? "base" : "novel")
        << '\n';
  }
}

DescriptionMode parse_description_mode(const std::string& name) {
  if (name == "concat") return DescriptionMode::kConcat;
  if (name == "average") return DescriptionMode::kAverage;
  throw std::invalid_argument("unknown description mode '" + name + "'");
}

std::vector<double> resolve_description_embedding(
    const EmbeddingStore& store, std::span<const std::string> phrases,
    DescriptionMode mode) {
  if (phrases.empty()) return store.at_f64(kEmptyWordKey);
  if (mode == DescriptionMode::kConcat) {
    std::string joined;
    for (std::size_t k = 0; k < phrases.size(); ++k) {
      if (k > 0) joined += ' ';
      joined += phrases[k];
    }
    return store.at_f64(ocr_key(joined));
  }
  std::vector<double> mean(store.dim(), 0.0);
  for (const auto& phrase : phrases) {
    auto v = store.at(ocr_key(phrase));
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += v[c];
  }
  for (double& c : mean) c /= static_cast<double>(phrases.size());
  return mean;
}

std::vector<double> resolve_description_embedding(const EmbeddingStore& store,
                                                  std::string_view description) {
  return store.at_f64(ocr_key(description));
}

std::vector<std::string> linked_phrases(const ScreenAnnotation& screen,
                                        std::size_t e) {
  if (!screen.links) {
    throw std::logic_error("screen '" + screen.image_id + "' is not linked");
  }
  std::vector<std::string> out;
  for (std::size_t id : screen.links->matched[e]) out.push_back(screen.ocr[id].text);
  return out;
}

void ensure_linked(std::vector<ScreenAnnotation>& screens, double threshold,
                   OverlapMetric metric) {
  for (auto& s : screens) {
    if (!s.links) s.links = link_ocr(s.elements, s.ocr, threshold, metric);
  }
}

}  // namespace apt
