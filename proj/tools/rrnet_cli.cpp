#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rrnet/checkpoint.hpp"
#include "rrnet/config.hpp"
#include "rrnet/train.hpp"

namespace fs = std::filesystem;
using namespace rrnet;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "rrnet-out";
  unsigned jobs = 1;
  std::string checkpoint;
  double tolerance = 1e-4;
};

RunConfig resolve(const Options& o) {
  RunConfig c = o.config.empty() ? preset("synthetic") : load_config(o.config);
  if (o.seed) c.train.seed = *o.seed;
  check_config(c);
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  os << text;
}

fs::path make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  return dir;
}

std::string metrics_csv(const MetricsReport& r) {
  std::string out = "epoch,loss,metric_name,metric_value\n";
  for (const auto& e : r.history) {
    out += std::to_string(e.epoch) + "," + detail::fmt_double(e.loss) + "," + r.metric_name + ",";
    if (e.metric) out += detail::fmt_double(*e.metric);
    out += "\n";
  }
  return out;
}

std::string results_csv(const MetricsReport& r) {
  std::string out = "metric,value\n";
  out += "best_epoch," + std::to_string(r.best_epoch) + "\n";
  for (const auto& [k, v] : r.final_metrics) out += k + "," + detail::fmt_double(v) + "\n";
  return out;
}

struct Summary {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;  // per metric, per run

  void add(const MetricsReport& r) {
    if (names.empty()) {
      for (const auto& [k, v] : r.final_metrics) names.push_back(k);
      values.resize(names.size());
    }
    for (std::size_t i = 0; i < names.size(); ++i) values[i].push_back(r.final_metrics[i].second);
  }

  std::pair<double, double> mean_std(std::size_t i) const {
    const auto& v = values[i];
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return {m, v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0};
  }
};

/// Runs every configured seed; writes per-run files when `out` is set.
Summary run_all(const RunConfig& c, const std::optional<fs::path>& out, bool verbose) {
  Summary summary;
  for (Index k = 0; k < c.runs; ++k) {
    TrainConfig tc = c.train;
    tc.seed = c.train.seed + static_cast<std::uint64_t>(k);
    const TaskDataset ds = load_task(c, tc.seed);
    RunResult r = run_task(ds, c.build, c.model, tc);
    if (out) {
      const fs::path dir = c.runs == 1 ? *out : make_dir(*out / ("run" + std::to_string(k)));
      write_text(dir / "metrics.csv", metrics_csv(r.report));
      write_text(dir / "results.csv", results_csv(r.report));
      save_checkpoint((dir / "checkpoint.bin").string(), r.params.named());
    }
    if (verbose) {
      std::printf("run %lld seed %llu: final loss %.6g, best epoch %lld", static_cast<long long>(k),
                  static_cast<unsigned long long>(tc.seed), r.report.history.back().loss,
                  static_cast<long long>(r.report.best_epoch));
      for (const auto& [name, v] : r.report.final_metrics) std::printf(", %s %.4f", name.c_str(), v);
      std::printf(" (%.1fs)\n", r.report.seconds);
    }
    summary.add(r.report);
  }
  return summary;
}

int cmd_train(const Options& o) {
  const RunConfig c = resolve(o);
  check_inputs(c);
  const fs::path out = make_dir(o.out);
  write_text(out / "manifest.txt", manifest(c));
  const Summary s = run_all(c, out, true);
  std::string csv = "metric,mean,std,runs\n";
  for (std::size_t i = 0; i < s.names.size(); ++i) {
    const auto [m, sd] = s.mean_std(i);
    csv += s.names[i] + "," + detail::fmt_double(m) + "," + detail::fmt_double(sd) + "," +
           std::to_string(s.values[i].size()) + "\n";
    std::printf("%s: %.4f +- %.4f over %zu run(s)\n", s.names[i].c_str(), m, sd, s.values[i].size());
  }
  write_text(out / "summary.csv", csv);
  return 0;
}

int cmd_eval(const Options& o) {
  if (o.checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
  const RunConfig c = resolve(o);
  check_inputs(c);
  const TaskDataset ds = load_task(c, c.train.seed);
  const TaskGraph tg = build_task_graph(ds, c.build, c.train.seed);
  ModelConfig mc = c.model;
  mc.raw_dims = {tg.bundle.nodes.features[0].cols(), tg.bundle.nodes.features[1].cols()};
  ModelParams params = init_params(mc, 0);
  restore_params(params, load_checkpoint(o.checkpoint), o.checkpoint);
  const PreparedGraph g(tg.bundle);
  for (const auto& [name, v] : evaluate_test(ds, tg, forward(g, params, mc).value())) {
    std::printf("%s,%s\n", name.c_str(), detail::fmt_double(v).c_str());
  }
  return 0;
}

int cmd_gradcheck(const Options& o) {
  ModelConfig mc;
  mc.hidden = 8;
  std::uint64_t seed = o.seed.value_or(0);
  if (!o.config.empty()) {
    const RunConfig c = resolve(o);
    mc = c.model;
    seed = c.train.seed;
  }
  GradcheckOptions opt;
  opt.tolerance = o.tolerance;
  const GradcheckReport r = tiny_gradcheck(mc, seed, opt);
  for (const auto& p : r.parameters) std::printf("%-32s %.3e\n", p.name.c_str(), p.max_relative_error);
  std::printf("max relative error %.3e (tolerance %.1e): %s\n", r.max_relative_error, opt.tolerance,
              r.passed ? "PASS" : "FAIL");
  return r.passed ? 0 : 1;
}

int cmd_sweep(const Options& o) {
  const RunConfig base = resolve(o);
  if (base.sweep.empty()) throw ConfigError("sweep needs at least one sweep.<key>=v1,v2 line");
  check_inputs(base);

  std::vector<RunConfig> cells(1, base);
  std::vector<std::vector<std::string>> labels(1);
  for (const auto& [key, values] : base.sweep) {
    std::vector<RunConfig> next;
    std::vector<std::vector<std::string>> next_labels;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      for (const auto& v : values) {
        RunConfig cell = cells[c];
        set_option(cell, key, v);
        check_config(cell);
        next.push_back(std::move(cell));
        next_labels.push_back(labels[c]);
        next_labels.back().push_back(v);
      }
    }
    cells = std::move(next);
    labels = std::move(next_labels);
  }

  std::vector<Summary> results(cells.size());
  std::vector<std::string> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        results[i] = run_all(cells[i], std::nullopt, false);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned jobs = std::max(1u, std::min<unsigned>(o.jobs, static_cast<unsigned>(cells.size())));
  for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!errors[i].empty()) throw Error("sweep cell " + std::to_string(i) + " failed: " + errors[i]);
  }

  std::string csv;
  for (const auto& [key, values] : base.sweep) csv += key + ",";
  for (std::size_t m = 0; m < results[0].names.size(); ++m) {
    csv += results[0].names[m] + "_mean," + results[0].names[m] + "_std";
    csv += m + 1 < results[0].names.size() ? "," : "";
  }
  csv += "\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (const auto& v : labels[i]) csv += v + ",";
    for (std::size_t m = 0; m < results[i].names.size(); ++m) {
      const auto [mean, sd] = results[i].mean_std(m);
      csv += detail::fmt_double(mean) + "," + detail::fmt_double(sd);
      csv += m + 1 < results[i].names.size() ? "," : "";
    }
    csv += "\n";
  }
  const fs::path out = make_dir(o.out);
  write_text(out / "manifest.txt", manifest(base));
  write_text(out / "sweep.csv", csv);
  std::cout << csv;
  return 0;
}

int cmd_synth(const Options& o) {
  const RunConfig c = resolve(o);
  const TaskDataset ds = gen_synthetic_task(c.synthetic, derive_seed(c.train.seed, "synthetic"));
  const fs::path out = make_dir(o.out);
  auto write_matrix = [&](const std::string& name, const Matrix& m) {
    std::ofstream os(out / name, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write '" + (out / name).string() + "'");
    write_feature_csv(os, m);
  };
  write_matrix("features1.csv", ds.features1);
  write_matrix("features2.csv", ds.features2);
  write_matrix("confidence.csv", ds.confidence);
  std::string pairs;
  for (const auto& [i, j] : ds.mapping) pairs += std::to_string(i) + " " + std::to_string(j) + "\n";
  write_text(out / "mapping.txt", pairs);

  RunConfig fc = c;
  fc.preset = "synthetic";
  fc.source = TaskSource::Features;
  fc.features1 = (out / "features1.csv").string();
  fc.features2 = (out / "features2.csv").string();
  fc.confidence = (out / "confidence.csv").string();
  fc.mapping = (out / "mapping.txt").string();
  fc.sweep.clear();
  write_text(out / "task.cfg", manifest(fc));
  std::printf("wrote %lld x %lld task to %s\n", static_cast<long long>(ds.n1), static_cast<long long>(ds.n2),
              out.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RR-Net cross-modality relational reasoning"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Config file (key=value lines)");
    sub->add_option("--seed", seed, "Override train.seed");
  };
  auto* train = app.add_subcommand("train", "Build graphs, train and write metrics, checkpoint and manifest");
  add_common(train);
  train->add_option("--out", o.out, "Output directory");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  add_common(eval);
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient check on a tiny synthetic bundle");
  add_common(grad);
  grad->add_option("--tolerance", o.tolerance, "Maximum relative error");
  auto* sweep = app.add_subcommand("sweep", "Train every cell of the sweep.* cross product");
  add_common(sweep);
  sweep->add_option("--out", o.out, "Output directory");
  sweep->add_option("--jobs", o.jobs, "Parallel cells")->check(CLI::PositiveNumber);
  auto* synth = app.add_subcommand("synth", "Write a synthetic mapping task as feature files");
  add_common(synth);
  synth->add_option("--out", o.out, "Output directory");

  CLI11_PARSE(app, argc, argv);
  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--seed") > 0) o.seed = seed;
  }

  try {
    if (train->parsed()) return cmd_train(o);
    if (eval->parsed()) return cmd_eval(o);
    if (grad->parsed()) return cmd_gradcheck(o);
    if (sweep->parsed()) return cmd_sweep(o);
    if (synth->parsed()) return cmd_synth(o);
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const ResourceError& e) {
    std::cerr << "resource error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
