#include "oostraj/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "oostraj/error.hpp"

namespace oostraj::metrics {

std::string_view distance_name(Distance d) { return d == Distance::Euclidean ? "euclidean" : "squared"; }

Distance parse_distance(std::string_view s) {
  if (s == "euclidean") return Distance::Euclidean;
  if (s == "squared") return Distance::Squared;
  throw Error(Errc::InvalidConfig, "eval.distance: expected euclidean or squared, got '" + std::string(s) + "'");
}

double mse_t(std::span<const PixelPoint> pred, std::span<const PixelPoint> gt, Distance d) {
  if (pred.size() != gt.size())
    throw Error(Errc::LengthMismatch, std::to_string(pred.size()) + " predicted vs " + std::to_string(gt.size()) + " ground-truth points");
  if (pred.empty()) throw Error(Errc::EmptyTrajectory, "mse_t on an empty trajectory");
  double total = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const double du = pred[t].u - gt[t].u, dv = pred[t].v - gt[t].v;
    total += d == Distance::Euclidean ? std::hypot(du, dv) : du * du + dv * dv;
  }
  return total / static_cast<double>(pred.size());
}

pipeline::Prediction ground_truth(const sim::Scene& scene) {
  const auto& px = scene.out_of_sight().pixel;
  const auto split = static_cast<std::ptrdiff_t>(scene.t_obs);
  return {{px.begin(), px.begin() + split}, {px.begin() + split, px.end()}};
}

EvalRow evaluate(const std::string& method, const PredictFn& predict, const std::vector<sim::Scene>& scenes, Distance d) {
  if (scenes.empty()) throw Error(Errc::EmptyInput, "evaluate: no scenes");
  std::vector<const sim::Scene*> order;
  for (const auto& s : scenes) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->seed < b->seed; });

  EvalRow row;
  row.method = method;
  for (const auto* s : order) {
    try {
      const auto gt = ground_truth(*s);
      const auto p = predict(*s);
      row.per_scene.push_back({s->seed, mse_t(p.denoised, gt.denoised, d), mse_t(p.future, gt.future, d)});
    } catch (const Error& e) {
      throw Error(e.code(), "scene " + std::to_string(s->seed) + ": " + e.what());
    }
  }
  for (const auto& sc : row.per_scene) {
    row.mse_d += sc.mse_d;
    row.mse_p += sc.mse_p;
  }
  row.scenes = static_cast<int>(row.per_scene.size());
  row.mse_d /= row.scenes;
  row.mse_p /= row.scenes;
  row.sum = row.mse_d + row.mse_p;
  return row;
}

namespace {

// Enough digits that SUM = MSE-D + MSE-P still holds to 1e-9 after printing.
std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_table(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10f", v);
  return buf;
}

std::string seed_list(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (auto s : seeds) out += (out.empty() ? "" : " ") + std::to_string(s);
  return out;
}

}  // namespace

std::string to_csv(const Report& r) {
  std::ostringstream os;
  os << "# " << r.title << "\n";
  os << "# split=" << r.split << " config_hash=" << r.config_hash << " seeds=" << seed_list(r.seeds)
     << " distance=" << distance_name(r.distance) << "\n";
  os << "method,split,scenes,params,SUM,MSE-D,MSE-P\n";
  for (const auto& row : r.rows)
    os << row.method << ',' << r.split << ',' << row.scenes << ',' << row.params << ',' << fmt(row.sum) << ','
       << fmt(row.mse_d) << ',' << fmt(row.mse_p) << "\n";
  return os.str();
}

std::string to_markdown(const Report& r) {
  std::ostringstream os;
  os << "## " << r.title << "\n\n";
  os << "Split `" << r.split << "`, config hash `" << r.config_hash << "`, seeds `" << seed_list(r.seeds)
     << "`, distance `" << distance_name(r.distance) << "`. Values in pixels.\n\n";
  os << "| Method | SUM | MSE-D | MSE-P | Params |\n|---|---:|---:|---:|---:|\n";
  for (const auto& row : r.rows)
    os << "| " << row.method << " | " << fmt_table(row.sum) << " | " << fmt_table(row.mse_d) << " | " << fmt_table(row.mse_p) << " | "
       << row.params << " |\n";

  // Kind x composition grid (rows: kind; column groups: vanilla, 2-stage, +VPD).
  std::map<std::string, std::map<std::string, const EvalRow*>> grid;
  const std::vector<std::string> comps{"direct", "two_stage", "plus_vpd"};
  for (const auto& row : r.rows) {
    std::string name = row.method == "ours" ? "transformer_plus_vpd" : row.method;
    for (const auto& c : comps) {
      const std::string suffix = "_" + c;
      if (name.size() > suffix.size() && name.ends_with(suffix))
        grid[name.substr(0, name.size() - suffix.size())][c] = &row;
    }
  }
  if (!grid.empty()) {
    os << "\n| Baseline | Vanilla SUM | MSE-D | MSE-P | + 2 Stage SUM | MSE-D | MSE-P | + VPD SUM | MSE-D | MSE-P |\n";
    os << "|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& [kind, cols] : grid) {
      os << "| " << kind;
      for (const auto& c : comps) {
        auto it = cols.find(c);
        if (it == cols.end()) os << " | - | - | -";
        else os << " | " << fmt_table(it->second->sum) << " | " << fmt_table(it->second->mse_d) << " | " << fmt_table(it->second->mse_p);
      }
      os << " |\n";
    }
  }
  return os.str();
}

void write_report(const std::filesystem::path& stem, const Report& r) {
  for (const auto& [ext, text] : {std::pair{".csv", to_csv(r)}, std::pair{".md", to_markdown(r)}}) {
    std::filesystem::path p = stem;
    p += ext;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + p.string());
    out << text;
    if (!out) throw Error(Errc::Io, "write failed for " + p.string());
  }
}

}  // namespace oostraj::metrics
