#include "oostraj/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>

#include "oostraj/baselines.hpp"
#include "oostraj/checkpoint.hpp"
#include "oostraj/geometry.hpp"
#include "oostraj/hash.hpp"
#include "oostraj/train.hpp"

namespace oostraj::cmd {

int exit_code(Errc code) {
  switch (code) {
    case Errc::InvalidConfig: return 2;
    case Errc::Io: return 3;
    case Errc::HashMismatch: return 4;
    case Errc::NonFiniteLoss: return 5;
    case Errc::InsufficientData: return 6;
    case Errc::Schema: return 7;
    default: return 1;
  }
}

namespace {

const std::vector<std::string> kSplits{"train", "val", "test"};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(Errc::Io, "cannot create directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

struct Data {
  io::Manifest manifest;
  std::map<std::string, std::vector<sim::Scene>> splits;
};

/// Reads a dataset directory and enforces the config hash for simulated data.
/// Imported data carries its own content hash and is accepted as is.
Data load_dataset(const config::RunConfig& cfg, const fs::path& dir, const std::vector<std::string>& splits) {
  Data d;
  d.manifest = io::read_manifest(dir / "manifest.json");
  if (d.manifest.source == "simulate" && d.manifest.config_hash != cfg.data_hash())
    throw Error(Errc::HashMismatch, "dataset " + dir.string() + " was generated under config hash " + d.manifest.config_hash +
                                        ", current config has " + cfg.data_hash());
  for (const auto& s : splits) d.splits[s] = io::read_jsonl(dir / d.manifest.split(s).file);
  return d;
}

std::vector<pipeline::MethodSpec> parse_methods(const std::vector<std::string>& names) {
  std::vector<pipeline::MethodSpec> out;
  for (const auto& n : names) out.push_back(pipeline::parse_method(n));
  return out;
}

metrics::PredictFn classical(const config::RunConfig& cfg, const pipeline::MethodSpec& spec) {
  if (spec.name == "const_velocity") return [](const sim::Scene& s) { return baselines::predict_const_velocity(s); };
  const auto params = cfg.smoother;
  return [params](const sim::Scene& s) { return baselines::predict_smoother(s, params); };
}

std::string runs_csv(const std::vector<SeededRun>& runs) {
  std::string out = "method,seed,SUM,MSE-D,MSE-P\n";
  char buf[160];
  for (const auto& r : runs) {
    std::snprintf(buf, sizeof buf, ",%llu,%.17g,%.17g,%.17g\n", static_cast<unsigned long long>(r.seed), r.row.sum, r.row.mse_d,
                  r.row.mse_p);
    out += r.method + buf;
  }
  return out;
}

}  // namespace

SimulateResult simulate(const config::RunConfig& cfg, const fs::path& out, std::ostream& log) {
  cfg.validate();
  const auto ds = sim::make_dataset(cfg.sim, cfg.seed, cfg.splits.train, cfg.splits.val, cfg.splits.test);
  ensure_dir(out);
  io::Manifest m;
  m.config_hash = cfg.data_hash();
  m.seed = cfg.seed;
  m.source = "simulate";
  const std::pair<const std::vector<sim::Scene>*, sim::SplitSeeds> parts[] = {
      {&ds.train, ds.train_seeds}, {&ds.val, ds.val_seeds}, {&ds.test, ds.test_seeds}};
  for (std::size_t i = 0; i < kSplits.size(); ++i) {
    const std::string file = kSplits[i] + ".jsonl";
    io::write_jsonl(out / file, *parts[i].first);
    m.splits.push_back({kSplits[i], file, parts[i].second.count, parts[i].second.begin, io::file_hash(out / file)});
    log << kSplits[i] << ": " << parts[i].second.count << " scenes\n";
  }
  io::write_manifest(out / "manifest.json", m);
  write_text(out / "config.json", cfg.to_json().dump(2) + "\n");
  log << "dataset " << out.string() << " (config hash " << m.config_hash << ")\n";
  return {m};
}

std::vector<fs::path> train(const config::RunConfig& cfg, const fs::path& dataset, const fs::path& out, const TrainOptions& opt,
                            std::ostream& log) {
  const auto specs = parse_methods(opt.methods);
  const Data d = load_dataset(cfg, dataset, {"train", "val"});
  std::vector<fs::path> best_paths;
  for (const auto& spec : specs) {
    if (!spec.learned) {
      log << spec.name << ": not a learned method, nothing to train\n";
      continue;
    }
    const fs::path dir = out / spec.name;
    ensure_dir(dir);
    train::Trainer tr(spec, cfg.model, cfg.train, d.splits.at("train"), d.splits.at("val"), d.manifest.config_hash);
    if (opt.resume && fs::exists(dir / "last.ckpt")) {
      tr.resume(ckpt::read(dir / "last.ckpt"));
      log << spec.name << ": resumed at epoch " << tr.epoch() << "\n";
    }
    std::ofstream csv(dir / "log.csv", std::ios::binary);
    if (!csv) throw Error(Errc::Io, "cannot write " + (dir / "log.csv").string());
    csv << train::log_header() << "\n";
    for (const auto& e : tr.log()) csv << train::log_row(e) << "\n";
    csv.flush();
    tr.run([&](const train::EpochLog& e) {
      csv << train::log_row(e) << "\n";
      csv.flush();
      if (!csv) throw Error(Errc::Io, "write failed for " + (dir / "log.csv").string());
      if (e.epoch % 25 == 0) ckpt::write(dir / "last.ckpt", tr.last_checkpoint());
      if (e.epoch % 10 == 0 || e.epoch == cfg.train.epochs)
        log << spec.name << " epoch " << e.epoch << ": val SUM " << e.val_sum << " (MSE-D " << e.val_mse_d << ", MSE-P "
            << e.val_mse_p << ")\n";
    });
    ckpt::write(dir / "last.ckpt", tr.last_checkpoint());
    ckpt::write(dir / "best.ckpt", tr.best_checkpoint());
    log << spec.name << ": best epoch " << tr.best_epoch() << ", checkpoint " << (dir / "best.ckpt").string() << "\n";
    best_paths.push_back(dir / "best.ckpt");
  }
  return best_paths;
}

metrics::Report eval(const config::RunConfig& cfg, const fs::path& dataset, const fs::path& out, const EvalOptions& opt,
                     std::ostream& log) {
  const bool explicit_methods = !opt.methods.empty();
  const auto specs = parse_methods(explicit_methods ? opt.methods : cfg.methods);
  const Data d = load_dataset(cfg, dataset, {opt.split});
  const auto& scenes = d.splits.at(opt.split);

  // Checkpoint lookup: explicit files by their recorded method, directories by layout.
  std::map<std::string, fs::path> ckpt_files;
  for (const auto& p : opt.checkpoints) {
    if (fs::is_regular_file(p)) {
      const auto c = ckpt::read(p);
      ckpt_files[c.meta.value("method", "")] = p;
    } else if (!fs::is_directory(p)) {
      throw Error(Errc::Io, "checkpoint path not found: " + p.string());
    }
  }
  const auto find_ckpt = [&](const std::string& method) -> std::optional<fs::path> {
    if (auto it = ckpt_files.find(method); it != ckpt_files.end()) return it->second;
    for (const auto& p : opt.checkpoints)
      if (fs::is_directory(p) && fs::is_regular_file(p / method / "best.ckpt")) return p / method / "best.ckpt";
    return std::nullopt;
  };

  metrics::Report r;
  r.title = "Evaluation";
  r.split = opt.split;
  r.config_hash = d.manifest.config_hash;
  r.seeds = {d.manifest.seed};
  r.distance = cfg.distance;
  for (const auto& spec : specs) {
    metrics::EvalRow row;
    if (!spec.learned) {
      row = metrics::evaluate(spec.name, classical(cfg, spec), scenes, cfg.distance);
    } else {
      const auto path = find_ckpt(spec.name);
      if (!path) {
        if (explicit_methods) throw Error(Errc::Io, "no checkpoint for method '" + spec.name + "'");
        log << spec.name << ": no checkpoint, skipped\n";
        continue;
      }
      const auto model = train::load_model(ckpt::read(*path), d.manifest.config_hash);
      if (model.spec().name != spec.name)
        throw Error(Errc::HashMismatch, path->string() + " holds method '" + model.spec().name + "', not '" + spec.name + "'");
      row = metrics::evaluate(spec.name, train::predictor(model), scenes, cfg.distance);
      row.params = model.parameter_count();
    }
    log << spec.name << ": SUM " << row.sum << " (MSE-D " << row.mse_d << ", MSE-P " << row.mse_p << ")\n";
    r.rows.push_back(std::move(row));
  }
  if (r.rows.empty()) throw Error(Errc::InvalidConfig, "methods: nothing to evaluate");
  ensure_dir(out);
  metrics::write_report(out / "eval", r);
  return r;
}

metrics::EvalRow train_and_score(const config::RunConfig& cfg, const std::string& method, std::uint64_t seed, int epochs,
                                 const std::vector<sim::Scene>& train, const std::vector<sim::Scene>& val,
                                 const std::vector<sim::Scene>& test, const std::string& data_hash) {
  const auto spec = pipeline::parse_method(method);
  if (!spec.learned) return metrics::evaluate(method, classical(cfg, spec), test, cfg.distance);
  train::TrainConfig tc = cfg.train;
  tc.seed = seed;
  tc.epochs = epochs;
  train::Trainer tr(spec, cfg.model, tc, train, val, data_hash);
  tr.run();
  const auto model = train::load_model(tr.best_checkpoint(), data_hash);
  auto row = metrics::evaluate(method, train::predictor(model), test, cfg.distance);
  row.params = model.parameter_count();
  return row;
}

const SeededRun& median_run(const std::vector<SeededRun>& runs, const std::string& method) {
  std::vector<const SeededRun*> mine;
  for (const auto& r : runs)
    if (r.method == method) mine.push_back(&r);
  if (mine.empty()) throw Error(Errc::EmptyInput, "no runs for method '" + method + "'");
  std::stable_sort(mine.begin(), mine.end(), [](auto* a, auto* b) { return a->row.sum < b->row.sum; });
  return *mine[(mine.size() - 1) / 2];
}

BenchmarkResult benchmark(const config::RunConfig& cfg, const fs::path& dataset, const std::vector<std::string>& methods,
                          std::ostream& log) {
  const auto specs = parse_methods(methods);
  const Data d = load_dataset(cfg, dataset, kSplits);
  BenchmarkResult b;
  for (const auto& spec : specs) {
    std::optional<metrics::EvalRow> fixed;  // non-learned methods do not depend on the seed
    for (auto seed : cfg.benchmark.seeds) {
      if (!fixed || spec.learned) {
        auto row = train_and_score(cfg, spec.name, seed, cfg.benchmark.epochs, d.splits.at("train"), d.splits.at("val"),
                                   d.splits.at("test"), d.manifest.config_hash);
        if (!spec.learned) fixed = row;
        b.runs.push_back({spec.name, seed, std::move(row)});
      } else {
        b.runs.push_back({spec.name, seed, *fixed});
      }
      const auto& r = b.runs.back().row;
      log << spec.name << " seed " << seed << ": SUM " << r.sum << " (MSE-D " << r.mse_d << ", MSE-P " << r.mse_p << ")\n";
    }
  }
  b.report.title = "Seeded benchmark (median run per method)";
  b.report.split = "test";
  b.report.config_hash = d.manifest.config_hash;
  b.report.seeds = cfg.benchmark.seeds;
  b.report.distance = cfg.distance;
  for (const auto& spec : specs) b.report.rows.push_back(median_run(b.runs, spec.name).row);
  return b;
}

BenchmarkResult ablate(const config::RunConfig& cfg, const fs::path& dataset, const fs::path& out, std::ostream& log) {
  const std::vector<std::string> variants{"ours", "no_cpe", "no_mde", "no_vpp", "no_opd"};
  auto b = benchmark(cfg, dataset, variants, log);
  for (auto& run : b.runs) run.method = std::string(pipeline::ablation_name(pipeline::parse_method(run.method).ablation));
  for (auto& row : b.report.rows) row.method = std::string(pipeline::ablation_name(pipeline::parse_method(row.method).ablation));
  b.report.title = "Ablation (median run per variant)";
  ensure_dir(out);
  metrics::write_report(out / "ablation", b.report);
  write_text(out / "ablation_runs.csv", runs_csv(b.runs));
  return b;
}

BenchmarkResult report(const config::RunConfig& cfg, const fs::path& dataset, const fs::path& out,
                       const std::vector<std::string>& methods, std::ostream& log) {
  auto b = benchmark(cfg, dataset, methods.empty() ? cfg.methods : methods, log);
  ensure_dir(out);
  metrics::write_report(out / "benchmark", b.report);
  write_text(out / "benchmark_runs.csv", runs_csv(b.runs));
  return b;
}

namespace {

geometry::PixelPoint project_clamped(const geometry::CameraMatrix& m, const geometry::WorldPoint& p) {
  const Eigen::Vector3d h = m.m * Eigen::Vector4d(p.x, p.y, p.z, 1.0);
  const double den = std::copysign(std::max(std::abs(h(2)), 1e-12), h(2));
  return {h(0) / den, h(1) / den};
}

}  // namespace

std::vector<CalibrationRow> calibrate(const fs::path& dataset, const fs::path& out, std::ostream& log) {
  const auto manifest = io::read_manifest(dataset / "manifest.json");
  std::vector<CalibrationRow> rows;
  int skipped = 0;
  for (const auto& split : manifest.splits) {
    for (const auto& scene : io::read_jsonl(dataset / split.file)) {
      const auto T = static_cast<std::size_t>(scene.total_steps());
      const auto agents = scene.in_sight();
      const bool usable = scene.cameras.size() == T &&
                          std::all_of(agents.begin(), agents.end(), [&](auto* a) { return a->world.size() == T; });
      if (!usable) {
        ++skipped;
        continue;
      }
      const bool is_static = std::all_of(scene.cameras.begin(), scene.cameras.end(),
                                         [&](const auto& c) { return c.m == scene.cameras.front().m; });
      CalibrationRow row{split.name, scene.seed, is_static, 0, 0, 0.0, 0};
      double total = 0.0;
      // Fits one matrix to the timestamps [begin, end); each point is scored
      // against the true camera of its own timestamp.
      const auto fit = [&](std::size_t begin, std::size_t end) {
        std::vector<geometry::Correspondence> corr;
        std::vector<std::pair<geometry::WorldPoint, geometry::PixelPoint>> truth;
        for (auto t = begin; t < end; ++t)
          for (const auto* a : agents) {
            if (!a->visible[t]) continue;
            const auto exact = geometry::project_point(scene.cameras[t], a->world[t]);
            corr.push_back({a->sensor[t], exact});
            truth.push_back({a->world[t], exact});
          }
        if (corr.size() < 6) return false;
        geometry::CameraMatrix est;
        try {
          est = geometry::dlt_estimate(corr);
        } catch (const Error& e) {
          if (e.code() == Errc::DegenerateConfiguration) return false;
          throw;
        }
        for (const auto& [w, px] : truth) {
          const auto p = project_clamped(est, w);
          total += std::hypot(p.u - px.u, p.v - px.v);
        }
        ++row.matrices;
        row.correspondences += static_cast<int>(corr.size());
        row.max_window = std::max(row.max_window, static_cast<int>(end - begin));
        return true;
      };
      if (is_static) {
        fit(0, T);
      } else {
        // Moving camera: each window grows from one timestamp until it fits.
        // Windows longer than one timestamp treat the camera as locally
        // static, so their error includes the camera motion.
        for (std::size_t begin = 0; begin < T;) {
          std::size_t end = begin + 1;
          while (end <= T && !fit(begin, end)) ++end;
          begin = end;
        }
      }
      if (row.matrices == 0) {
        ++skipped;
        continue;
      }
      row.error_px = total / row.correspondences;
      rows.push_back(row);
    }
  }
  if (rows.empty())
    throw Error(Errc::InsufficientData, "no scene has 6 or more usable correspondences per calibrated window (" +
                                            std::to_string(skipped) + " scenes skipped)");

  std::string csv = "split,seed,camera,matrices,max_window,correspondences,error_px,flagged\n";
  char buf[200];
  int flagged = 0;
  double mean = 0.0;
  for (const auto& r : rows) {
    const bool flag = r.error_px > 1.0;
    flagged += flag;
    mean += r.error_px;
    std::snprintf(buf, sizeof buf, ",%llu,%s,%d,%d,%d,%.17g,%d\n", static_cast<unsigned long long>(r.seed),
                  r.static_camera ? "static" : "moving", r.matrices, r.max_window, r.correspondences, r.error_px, flag ? 1 : 0);
    csv += r.split + buf;
  }
  ensure_dir(out);
  write_text(out / "calibration.csv", csv);
  log << rows.size() << " scenes calibrated, " << skipped << " skipped, mean error " << mean / static_cast<double>(rows.size())
      << " px, " << flagged << " above 1 px\n";
  return rows;
}

io::Manifest import_dataset(const fs::path& source, const fs::path& out, std::ostream& log) {
  std::vector<std::pair<std::string, std::vector<sim::Scene>>> parts;
  if (fs::is_directory(source)) {
    for (const auto& s : kSplits)
      if (fs::exists(source / (s + ".jsonl"))) parts.emplace_back(s, io::read_jsonl(source / (s + ".jsonl")));
  } else {
    parts.emplace_back("test", io::read_jsonl(source));
  }
  std::size_t total = 0;
  for (const auto& [name, scenes] : parts) total += scenes.size();
  if (total == 0) throw Error(Errc::Schema, "no scenes found in " + source.string());

  ensure_dir(out);
  io::Manifest m;
  m.source = "import";
  std::string content;
  for (const auto& [name, scenes] : parts) {
    const std::string file = name + ".jsonl";
    io::write_jsonl(out / file, scenes);
    const auto h = io::file_hash(out / file);
    m.splits.push_back({name, file, static_cast<int>(scenes.size()), scenes.empty() ? 0 : scenes.front().seed, h});
    content += name + ":" + h + ";";
    log << name << ": " << scenes.size() << " scenes\n";
  }
  m.config_hash = "import-" + hash_hex(content);
  io::write_manifest(out / "manifest.json", m);
  log << "imported dataset " << out.string() << " (hash " << m.config_hash << ")\n";
  return m;
}

}  // namespace oostraj::cmd
