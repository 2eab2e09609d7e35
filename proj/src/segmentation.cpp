#include "primseg/segmentation.hpp"

#include "json.hpp"

#include <algorithm>

namespace primseg {

using nlohmann::json;

std::optional<Primitive> SegmentInfo::primitive() const {
  if (patch) return Primitive{type, Params::Zero(), patch};
  if (params) return Primitive{type, *params, std::nullopt};
  return std::nullopt;
}

std::vector<std::vector<int>> Segmentation::members() const {
  std::vector<std::vector<int>> out(segments.size());
  for (size_t i = 0; i < labels.size(); ++i) out[static_cast<size_t>(labels[i])].push_back(static_cast<int>(i));
  return out;
}

void Segmentation::validate() const {
  std::vector<int> counts(segments.size(), 0);
  for (int l : labels) {
    if (l < 0 || l >= count()) throw Error("label " + std::to_string(l) + " out of range", "segmentation");
    ++counts[static_cast<size_t>(l)];
  }
  for (size_t k = 0; k < segments.size(); ++k)
    if (counts[k] != segments[k].size)
      throw Error("segment " + std::to_string(k) + " size disagrees with its labels", "segmentation");
}

std::vector<int> canonical_labels(const std::vector<int>& labels) {
  std::vector<std::pair<int, int>> map;  // (old, new)
  std::vector<int> out(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    auto it = std::find_if(map.begin(), map.end(), [&](const auto& p) { return p.first == labels[i]; });
    if (it == map.end()) {
      map.emplace_back(labels[i], static_cast<int>(map.size()));
      it = map.end() - 1;
    }
    out[i] = it->second;
  }
  return out;
}

Segmentation segmentation_from_labels(const std::vector<int>& labels) {
  Segmentation s;
  s.labels = canonical_labels(labels);
  for (int l : s.labels) {
    if (l >= s.count()) s.segments.resize(static_cast<size_t>(l) + 1);
    ++s.segments[static_cast<size_t>(l)].size;
  }
  return s;
}

namespace {

json patch_to_json(const Patch& p) {
  json control = json::array();
  for (Eigen::Index i = 0; i < p.control().rows(); ++i)
    control.push_back({p.control()(i, 0), p.control()(i, 1), p.control()(i, 2)});
  return {{"rows", p.rows()}, {"cols", p.cols()}, {"closed_u", p.closed_u()}, {"control", control}};
}

Patch patch_from_json(const json& j) {
  const int rows = j.at("rows").get<int>(), cols = j.at("cols").get<int>();
  const auto& control = j.at("control");
  Points<double> c(static_cast<Eigen::Index>(control.size()), 3);
  for (size_t i = 0; i < control.size(); ++i)
    for (int d = 0; d < 3; ++d) c(static_cast<Eigen::Index>(i), d) = control.at(i).at(static_cast<size_t>(d)).get<double>();
  return Patch(rows, cols, std::move(c), j.at("closed_u").get<bool>());
}

}  // namespace

std::string segmentation_to_json(const Segmentation& seg) {
  json j;
  j["n"] = seg.labels.size();
  j["labels"] = seg.labels;
  json segs = json::array();
  for (size_t k = 0; k < seg.segments.size(); ++k) {
    const auto& s = seg.segments[k];
    json e;
    e["id"] = k;
    e["type"] = std::string(type_name(s.type));
    if (s.params) {
      std::vector<double> p(s.params->data(), s.params->data() + kParamDim);
      e["params"] = p;
    } else {
      e["params"] = nullptr;
    }
    if (s.patch) e["patch"] = patch_to_json(*s.patch);
    e["size"] = s.size;
    e["rms_residual"] = s.rms_residual;
    segs.push_back(std::move(e));
  }
  j["segments"] = std::move(segs);
  return j.dump(2) + "\n";
}

Segmentation segmentation_from_json(const std::string& text) {
  Segmentation seg;
  try {
    const json j = json::parse(text);
    seg.labels = j.at("labels").get<std::vector<int>>();
    if (j.contains("n") && j.at("n").get<size_t>() != seg.labels.size())
      throw Error("segmentation field n disagrees with the label count", "segmentation");
    for (const auto& e : j.at("segments")) {
      SegmentInfo s;
      s.type = type_from_name(e.at("type").get<std::string>());
      if (e.contains("params") && !e.at("params").is_null()) {
        const auto v = e.at("params").get<std::vector<double>>();
        if (v.size() != static_cast<size_t>(kParamDim)) throw Error("segment params must have 22 entries", "segmentation");
        s.params = Eigen::Map<const Params>(v.data());
      }
      if (e.contains("patch")) s.patch = patch_from_json(e.at("patch"));
      s.size = e.at("size").get<int>();
      s.rms_residual = e.value("rms_residual", 0.0);
      seg.segments.push_back(std::move(s));
    }
  } catch (const json::exception& ex) {
    throw Error(std::string("malformed segmentation JSON: ") + ex.what(), "segmentation");
  }
  seg.validate();
  return seg;
}

}  // namespace primseg
