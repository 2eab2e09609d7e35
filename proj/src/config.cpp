#include "primseg/config.hpp"

#include "primseg/io.hpp"

#include "json.hpp"

#include <cmath>
#include <functional>
#include <map>

namespace primseg {

using nlohmann::json;

namespace {

const char* const kTypeKeys[kNumTypes] = {"sigma_plane",       "sigma_sphere",       "sigma_cylinder",
                                          "sigma_cone",        "sigma_bspline_open", "sigma_bspline_closed"};

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  throw Error("config key '" + key + "': " + why, "config");
}

// Binds JSON keys of one section to fields of the config.
class Section {
 public:
  explicit Section(std::string name) : name_(std::move(name)) {}

  void number(const std::string& key, double& field) {
    readers_[key] = [this, key, &field](const json& v) {
      if (!v.is_number()) bad_key(path(key), "expected a number");
      field = v.get<double>();
    };
    writers_.emplace_back(key, [&field] { return json(field); });
  }
  template <typename Int>
  void integer(const std::string& key, Int& field) {
    readers_[key] = [this, key, &field](const json& v) {
      if (!v.is_number_integer()) bad_key(path(key), "expected an integer");
      field = v.get<Int>();
    };
    writers_.emplace_back(key, [&field] { return json(field); });
  }
  void boolean(const std::string& key, bool& field) {
    readers_[key] = [this, key, &field](const json& v) {
      if (!v.is_boolean()) bad_key(path(key), "expected true or false");
      field = v.get<bool>();
    };
    writers_.emplace_back(key, [&field] { return json(field); });
  }
  void custom(const std::string& key, std::function<void(const json&)> read, std::function<json()> write) {
    readers_[key] = std::move(read);
    writers_.emplace_back(key, std::move(write));
  }

  void read(const json& obj) const {
    if (!obj.is_object()) bad_key(name_, "expected an object");
    for (const auto& [k, v] : obj.items()) {
      const auto it = readers_.find(k);
      if (it == readers_.end()) bad_key(path(k), "unknown key");
      it->second(v);
    }
  }
  json write() const {
    json out = json::object();
    for (const auto& [k, w] : writers_) out[k] = w();
    return out;
  }
  std::string path(const std::string& key) const { return name_ + "." + key; }

 private:
  std::string name_;
  std::map<std::string, std::function<void(const json&)>> readers_;
  std::vector<std::pair<std::string, std::function<json()>>> writers_;
};

struct Schema {
  Section pipeline{"pipeline"}, hyper{"hyper"}, estimation{"estimation"}, mean_shift{"mean_shift"},
      weights{"weights"}, loss{"loss"};

  explicit Schema(Config& c) {
    auto& p = c.pipeline;
    pipeline.integer("seed", p.seed);
    pipeline.integer("dense_cap", p.dense_cap);
    pipeline.integer("k", p.k);
    pipeline.boolean("normalize", p.normalize);
    pipeline.boolean("merge_adjacent", p.merge_adjacent);
    pipeline.integer("merge_k", p.merge_k);
    pipeline.custom(
        "cone_cosine_distance",
        [&p](const json& v) {
          if (!v.is_boolean()) bad_key("pipeline.cone_cosine_distance", "expected true or false");
          p.cone = v.get<bool>() ? ConeFormula::Cosine : ConeFormula::Perpendicular;
        },
        [&p] { return json(p.cone == ConeFormula::Cosine); });
    pipeline.custom(
        "embedding_scale",
        [&p](const json& v) {
          const std::string s = v.is_string() ? v.get<std::string>() : "";
          if (s == "amplify") p.scale = EmbeddingScale::Amplify;
          else if (s == "attenuate") p.scale = EmbeddingScale::Attenuate;
          else bad_key("pipeline.embedding_scale", "expected \"amplify\" or \"attenuate\"");
        },
        [&p] { return json(p.scale == EmbeddingScale::Amplify ? "amplify" : "attenuate"); });

    auto& h = p.hp;
    for (int t = 0; t < kNumTypes; ++t) hyper.number(kTypeKeys[t], h.sigma_per_type[static_cast<size_t>(t)]);
    hyper.number("sigma_e", h.sigma_e);
    hyper.number("sigma_semantic", h.sigma_semantic);
    hyper.number("sigma_consistency", h.sigma_consistency);
    hyper.number("sigma_smoothness", h.sigma_smoothness);
    hyper.number("bandwidth", h.bandwidth);
    hyper.number("bandwidth_factor", h.bandwidth_factor);
    hyper.integer("d_min", h.d_min);
    hyper.integer("d_max", h.d_max);

    auto& e = p.estimation;
    estimation.integer("k_fit", e.k_fit);
    estimation.number("tau", e.tau);
    estimation.number("inlier_threshold", e.inlier_threshold);
    estimation.number("bspline_threshold", e.bspline_threshold);

    auto& m = p.mean_shift;
    mean_shift.integer("max_iter", m.max_iter);
    mean_shift.number("tol_factor", m.tol_factor);
    mean_shift.number("merge_factor", m.merge_factor);
    mean_shift.integer("min_size", m.min_size);

    weights.number("max_raw_weight", p.weights.max_raw_weight);

    auto& l = c.loss;
    loss.number("alpha", l.alpha);
    loss.number("beta", l.beta);
    loss.number("lambda_pull", l.lambda_pull);
    loss.number("nu_push", l.nu_push);
    loss.number("delta1", l.delta1);
    loss.number("delta2", l.delta2);
  }

  std::vector<Section*> sections() { return {&pipeline, &hyper, &estimation, &mean_shift, &weights, &loss}; }
};

std::string section_name(const Section& s) { return s.path("").substr(0, s.path("").size() - 1); }

}  // namespace

void Config::validate() const {
  const auto& p = pipeline;
  const auto& h = p.hp;
  auto positive = [](double v, const std::string& key) {
    if (!(v > 0) || !std::isfinite(v)) bad_key(key, "must be positive");
  };
  for (int t = 0; t < kNumTypes; ++t) positive(h.sigma_per_type[static_cast<size_t>(t)], std::string("hyper.") + kTypeKeys[t]);
  positive(h.sigma_e, "hyper.sigma_e");
  positive(h.sigma_semantic, "hyper.sigma_semantic");
  positive(h.sigma_consistency, "hyper.sigma_consistency");
  positive(h.sigma_smoothness, "hyper.sigma_smoothness");
  positive(h.bandwidth_factor, "hyper.bandwidth_factor");
  if (h.bandwidth < 0 || !std::isfinite(h.bandwidth)) bad_key("hyper.bandwidth", "must be zero or positive");
  if (h.d_min < 1) bad_key("hyper.d_min", "must be at least 1");
  if (h.d_max < h.d_min) bad_key("hyper.d_max", "must be at least d_min");
  if (p.dense_cap < 2) bad_key("pipeline.dense_cap", "must be at least 2");
  if (p.merge_k < 1) bad_key("pipeline.merge_k", "must be at least 1");
  if (p.k < 1) bad_key("pipeline.k", "must be at least 1");
  if (p.estimation.k_fit < 6) bad_key("estimation.k_fit", "must be at least 6");
  positive(p.estimation.tau, "estimation.tau");
  positive(p.estimation.inlier_threshold, "estimation.inlier_threshold");
  positive(p.estimation.bspline_threshold, "estimation.bspline_threshold");
  if (p.mean_shift.max_iter < 1) bad_key("mean_shift.max_iter", "must be at least 1");
  positive(p.mean_shift.tol_factor, "mean_shift.tol_factor");
  positive(p.mean_shift.merge_factor, "mean_shift.merge_factor");
  if (p.mean_shift.min_size < 1) bad_key("mean_shift.min_size", "must be at least 1");
  positive(p.weights.max_raw_weight, "weights.max_raw_weight");
  try {
    loss.validate();
  } catch (const Error& e) {
    throw Error(std::string("config key 'loss': ") + e.what(), "config");
  }
}

Config parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("malformed config JSON: ") + e.what(), "config");
  }
  if (!j.is_object()) throw Error("config must be a JSON object", "config");
  Config c;
  Schema schema(c);
  for (const auto& [k, v] : j.items()) {
    Section* match = nullptr;
    for (Section* s : schema.sections())
      if (section_name(*s) == k) match = s;
    if (!match) bad_key(k, "unknown key");
    match->read(v);
  }
  c.pipeline.fit.inlier_threshold = c.pipeline.estimation.inlier_threshold;
  c.pipeline.estimation.fit.inlier_threshold = c.pipeline.estimation.inlier_threshold;
  c.validate();
  return c;
}

Config load_config(const std::string& path) { return parse_config(io::read_text(path)); }

std::string config_to_json(const Config& cfg) {
  Config c = cfg;
  Schema schema(c);
  json out = json::object();
  for (Section* s : schema.sections()) out[section_name(*s)] = s->write();
  return out.dump(2) + "\n";
}

}  // namespace primseg
