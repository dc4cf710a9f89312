#pragma once

// Run configuration as flat "section.key=value" text. Presets set defaults;
// explicit keys override them. Sweep axes are "sweep.<key>=v1,v2,...".

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rrnet/build.hpp"
#include "rrnet/data.hpp"
#include "rrnet/model.hpp"
#include "rrnet/train.hpp"

namespace rrnet {

enum class TaskSource { Synthetic, Features, FilmTrust };

struct RunConfig {
  std::string preset = "synthetic";
  TaskSource source = TaskSource::Synthetic;
  SyntheticSpec synthetic;
  std::string features1;
  std::string features2;
  std::string confidence;  // optional n1 x n2 CSV; cosine across modalities when empty
  std::string mapping;
  std::string ratings;
  std::string trust;
  double rating_min = 0.5;
  double rating_max = 4.0;
  BuildConfig build;
  ModelConfig model;
  TrainConfig train;
  std::array<double, 3> split{0.8, 0.1, 0.1};
  Index runs = 1;
  std::vector<std::pair<std::string, std::vector<std::string>>> sweep;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError(key + ": expected a number, got '" + s + "'");
  }
  return v;
}

inline long long parse_int(const std::string& key, const std::string& s) {
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError(key + ": expected an integer, got '" + s + "'");
  }
  return v;
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

inline const char* source_name(TaskSource s) {
  switch (s) {
    case TaskSource::Synthetic:
      return "synthetic";
    case TaskSource::Features:
      return "features";
    case TaskSource::FilmTrust:
      return "filmtrust";
  }
  return "?";
}

inline TaskSource parse_source(const std::string& s) {
  if (s == "synthetic") return TaskSource::Synthetic;
  if (s == "features") return TaskSource::Features;
  if (s == "filmtrust") return TaskSource::FilmTrust;
  throw ConfigError("task.source: unknown source '" + s + "' (expected synthetic, features or filmtrust)");
}

#define RRNET_STR_FIELD(KEY, MEMBER)                                         \
  Field {                                                                    \
    KEY, [](const RunConfig& c) { return c.MEMBER; },                       \
        [](RunConfig& c, const std::string& v) { c.MEMBER = v; }            \
  }
#define RRNET_INT_FIELD(KEY, MEMBER)                                                   \
  Field {                                                                              \
    KEY, [](const RunConfig& c) { return std::to_string(c.MEMBER); },                 \
        [](RunConfig& c, const std::string& v) {                                       \
          c.MEMBER = static_cast<decltype(c.MEMBER)>(parse_int(KEY, v));               \
        }                                                                              \
  }
#define RRNET_REAL_FIELD(KEY, MEMBER)                                                               \
  Field {                                                                                           \
    KEY, [](const RunConfig& c) { return fmt_double(c.MEMBER); },                                  \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_double(KEY, v); }               \
  }

inline const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"task.preset", [](const RunConfig& c) { return c.preset; },
            [](RunConfig&, const std::string&) {}},
      Field{"task.source", [](const RunConfig& c) { return std::string(source_name(c.source)); },
            [](RunConfig& c, const std::string& v) { c.source = parse_source(v); }},
      RRNET_INT_FIELD("synthetic.n", synthetic.n),
      RRNET_INT_FIELD("synthetic.clusters", synthetic.clusters),
      RRNET_INT_FIELD("synthetic.d1", synthetic.d1),
      RRNET_INT_FIELD("synthetic.d2", synthetic.d2),
      RRNET_INT_FIELD("synthetic.latent_dim", synthetic.latent_dim),
      RRNET_REAL_FIELD("synthetic.noise", synthetic.noise),
      RRNET_STR_FIELD("data.features1", features1),
      RRNET_STR_FIELD("data.features2", features2),
      RRNET_STR_FIELD("data.confidence", confidence),
      RRNET_STR_FIELD("data.mapping", mapping),
      RRNET_STR_FIELD("data.ratings", ratings),
      RRNET_STR_FIELD("data.trust", trust),
      RRNET_REAL_FIELD("data.rating_min", rating_min),
      RRNET_REAL_FIELD("data.rating_max", rating_max),
      RRNET_INT_FIELD("build.k_intra1", build.k_intra1),
      RRNET_INT_FIELD("build.k_intra2", build.k_intra2),
      RRNET_INT_FIELD("build.k_inter", build.k_inter),
      Field{"build.metric", [](const RunConfig& c) { return std::string(metric_name(c.build.metric)); },
            [](RunConfig& c, const std::string& v) { c.build.metric = parse_metric(v); }},
      Field{"build.inter_mode", [](const RunConfig& c) { return std::string(inter_mode_name(c.build.inter_mode)); },
            [](RunConfig& c, const std::string& v) { c.build.inter_mode = parse_inter_mode(v); }},
      RRNET_INT_FIELD("build.embedding_dim", build.embedding_dim),
      RRNET_INT_FIELD("build.max_inter_edges", build.max_inter_edges),
      RRNET_INT_FIELD("model.hidden", model.hidden),
      RRNET_INT_FIELD("model.intra_units", model.n_intra_units),
      RRNET_INT_FIELD("model.inter_units", model.n_inter_units),
      RRNET_INT_FIELD("model.encoder_hidden_layers", model.encoder_hidden_layers),
      RRNET_REAL_FIELD("train.learning_rate", train.learning_rate),
      RRNET_REAL_FIELD("train.momentum", train.momentum),
      RRNET_REAL_FIELD("train.weight_decay", train.weight_decay),
      RRNET_INT_FIELD("train.epochs", train.epochs),
      RRNET_INT_FIELD("train.eval_every", train.eval_every),
      Field{"train.seed", [](const RunConfig& c) { return std::to_string(c.train.seed); },
            [](RunConfig& c, const std::string& v) {
              const long long s = parse_int("train.seed", v);
              if (s < 0) throw ConfigError("train.seed must be non-negative");
              c.train.seed = static_cast<std::uint64_t>(s);
            }},
      Field{"train.reduction",
            [](const RunConfig& c) { return std::string(c.train.reduction == Reduction::Mean ? "mean" : "sum"); },
            [](RunConfig& c, const std::string& v) {
              if (v == "mean") {
                c.train.reduction = Reduction::Mean;
              } else if (v == "sum") {
                c.train.reduction = Reduction::Sum;
              } else {
                throw ConfigError("train.reduction: expected mean or sum, got '" + v + "'");
              }
            }},
      RRNET_REAL_FIELD("split.train", split[0]),
      RRNET_REAL_FIELD("split.val", split[1]),
      RRNET_REAL_FIELD("split.test", split[2]),
      RRNET_INT_FIELD("run.runs", runs),
  };
  return table;
}

#undef RRNET_STR_FIELD
#undef RRNET_INT_FIELD
#undef RRNET_REAL_FIELD

inline const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

}  // namespace detail

inline std::vector<std::string> preset_names() {
  return {"synthetic", "esc10", "esc50", "cifar10", "cifar100", "filmtrust"};
}

inline RunConfig preset(const std::string& name) {
  RunConfig c;
  c.preset = name;
  c.model.hidden = 16;
  c.train.learning_rate = 0.01;
  c.train.momentum = 0.9;
  c.train.weight_decay = 5e-4;
  c.train.reduction = Reduction::Mean;
  if (name == "synthetic") {
    c.source = TaskSource::Synthetic;
    c.build.k_intra1 = 5;
    c.build.k_intra2 = 5;
    c.build.k_inter = 10;
    c.train.learning_rate = 0.05;
    c.train.epochs = 500;
    c.split = {0.6, 0.2, 0.2};
  } else if (name == "esc10" || name == "esc50" || name == "cifar10" || name == "cifar100") {
    c.source = TaskSource::Features;
    c.train.epochs = 200;
    c.split = {0.6, 0.2, 0.2};
    if (name == "esc10") {
      c.build.k_intra1 = 5, c.build.k_intra2 = 2, c.build.k_inter = 10;
    } else if (name == "esc50") {
      c.build.k_intra1 = 10, c.build.k_intra2 = 2, c.build.k_inter = 20;
      c.train.learning_rate = 0.1;
    } else if (name == "cifar10") {
      c.build.k_intra1 = 10, c.build.k_intra2 = 2, c.build.k_inter = 10;
    } else {
      c.build.k_intra1 = 20, c.build.k_intra2 = 3, c.build.k_inter = 15;
    }
    if (name.rfind("cifar", 0) == 0) {
      c.model.n_intra_units = 2;
      c.model.n_inter_units = 3;
    }
  } else if (name == "filmtrust") {
    c.source = TaskSource::FilmTrust;
    c.build.inter_mode = InterMode::Full;
    c.build.embedding_dim = 128;
    c.model.n_intra_units = 2;
    c.model.n_inter_units = 3;
    c.train.epochs = 500;
    c.train.eval_every = 10;
    c.rating_min = 0.5;
    c.rating_max = 4.0;
    c.split = {0.8, 0.1, 0.1};
    c.runs = 5;
  } else {
    std::string known;
    for (const auto& p : preset_names()) known += (known.empty() ? "" : ", ") + p;
    throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
  }
  return c;
}

inline void set_option(RunConfig& c, const std::string& key, const std::string& value) {
  if (key.rfind("sweep.", 0) == 0) {
    const std::string target = key.substr(6);
    if (target == "task.preset" || detail::find_field(target) == nullptr) {
      throw ConfigError("sweep over unknown key '" + target + "'");
    }
    std::vector<std::string> values;
    std::stringstream ss(value);
    std::string v;
    while (std::getline(ss, v, ',')) values.push_back(detail::trim(v));
    if (values.empty()) throw ConfigError(key + ": no values");
    for (auto& axis : c.sweep) {
      if (axis.first == target) {
        axis.second = values;
        return;
      }
    }
    c.sweep.emplace_back(target, values);
    return;
  }
  const detail::Field* f = detail::find_field(key);
  if (f == nullptr) throw ConfigError("unknown config key '" + key + "'");
  f->set(c, value);
}

/// Semantic checks shared by every command.
inline void check_config(const RunConfig& c) {
  c.train.check();
  ModelConfig m = c.model;
  m.raw_dims = {1, 1};
  m.check();
  if (c.runs < 1) throw ConfigError("run.runs must be at least 1");
  if (c.build.embedding_dim < 1) throw ConfigError("build.embedding_dim must be positive");
  if (!(c.rating_max > c.rating_min)) throw ConfigError("data.rating_max must exceed data.rating_min");
}

/// Parses "key=value" lines; '#' starts a comment. A task.preset line is
/// applied first wherever it appears.
inline RunConfig parse_config(std::istream& in, const std::string& origin = "config") {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t lineno = 0;
  std::string preset_name = "synthetic";
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (key == "task.preset") {
      preset_name = value;
    } else {
      entries.emplace_back(std::move(key), std::move(value));
    }
  }
  RunConfig c = preset(preset_name);
  for (const auto& [k, v] : entries) {
    try {
      set_option(c, k, v);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ": " + e.what());
    }
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  return parse_config(in, path);
}

/// Every resolved key, one per line, in table order. Parsing the output
/// yields the same configuration.
inline std::string manifest(const RunConfig& c) {
  std::ostringstream os;
  for (const auto& f : detail::fields()) os << f.key << '=' << f.get(c) << '\n';
  for (const auto& [key, values] : c.sweep) {
    os << "sweep." << key << '=';
    for (std::size_t i = 0; i < values.size(); ++i) os << (i ? "," : "") << values[i];
    os << '\n';
  }
  return os.str();
}

/// Input paths the source needs; each must be readable before a run starts.
inline void check_inputs(const RunConfig& c) {
  auto need = [](const std::string& key, const std::string& path) {
    if (path.empty()) throw ConfigError(key + " is required for this task source");
    std::ifstream probe(path);
    if (!probe) throw IoError("cannot open " + key + " '" + path + "'");
  };
  if (c.source == TaskSource::Features) {
    need("data.features1", c.features1);
    need("data.features2", c.features2);
    need("data.mapping", c.mapping);
    if (!c.confidence.empty()) need("data.confidence", c.confidence);
  } else if (c.source == TaskSource::FilmTrust) {
    need("data.ratings", c.ratings);
    need("data.trust", c.trust);
  }
}

/// Dataset for `seed` with its split applied.
inline TaskDataset load_task(const RunConfig& c, std::uint64_t seed) {
  TaskDataset ds;
  switch (c.source) {
    case TaskSource::Synthetic:
      ds = gen_synthetic_task(c.synthetic, derive_seed(seed, "synthetic"));
      break;
    case TaskSource::Features: {
      ds.kind = TaskKind::Mapping;
      ds.features1 = read_feature_csv(c.features1);
      ds.features2 = read_feature_csv(c.features2);
      ds.n1 = ds.features1.rows();
      ds.n2 = ds.features2.rows();
      ds.mapping = read_pair_list(c.mapping);
      if (!c.confidence.empty()) {
        ds.confidence = read_feature_csv(c.confidence);
      } else if (ds.features1.cols() == ds.features2.cols()) {
        Matrix a = ds.features1.rowwise().normalized();
        Matrix b = ds.features2.rowwise().normalized();
        ds.confidence = a * b.transpose();
      } else if (c.build.inter_mode == InterMode::TopK) {
        throw DataError("top-k inter edges across feature widths " + std::to_string(ds.features1.cols()) + " and " +
                        std::to_string(ds.features2.cols()) + " need data.confidence");
      }
      break;
    }
    case TaskSource::FilmTrust:
      ds = load_filmtrust(c.ratings, c.trust, {c.rating_min, c.rating_max});
      break;
  }
  check_dataset(ds);
  split_dataset(ds, c.split, derive_seed(seed, "split"));
  return ds;
}

}  // namespace rrnet
