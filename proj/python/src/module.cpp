// Python bindings: geometry helpers, the metric, scene generation and the
// command layer. Structured values cross the boundary as JSON text and are
// decoded by the pure-Python wrapper in oostraj/__init__.py.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "oostraj/commands.hpp"
#include "oostraj/geometry.hpp"
#include "oostraj/metrics.hpp"
#include "oostraj/scene_io.hpp"

namespace py = pybind11;
using namespace oostraj;

namespace {

using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
using Points3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Matrix34 = Eigen::Matrix<double, 3, 4, Eigen::RowMajor>;

std::vector<geometry::PixelPoint> pixels(const Points2& p) {
  std::vector<geometry::PixelPoint> out;
  for (Eigen::Index i = 0; i < p.rows(); ++i) out.push_back({p(i, 0), p(i, 1)});
  return out;
}

std::vector<geometry::WorldPoint> worlds(const Points3& p) {
  std::vector<geometry::WorldPoint> out;
  for (Eigen::Index i = 0; i < p.rows(); ++i) out.push_back({p(i, 0), p(i, 1), p(i, 2)});
  return out;
}

config::RunConfig parse_config(const std::string& text) {
  return text.empty() ? config::defaults() : config::from_json(config::json::parse(text));
}

/// Runs a command with its log captured; returns the log text.
template <class F>
std::string logged(F&& f) {
  std::ostringstream log;
  f(log);
  return log.str();
}

}  // namespace

PYBIND11_MODULE(_oostraj, m) {
  m.doc() = "Out-of-sight trajectory denoising and prediction (native core)";

  static py::exception<Error> error(m, "OostrajError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetObject(error.ptr(), py::make_tuple(e.what(), std::string(errc_name(e.code())), cmd::exit_code(e.code())).ptr());
    }
  });

  m.def("mse_t", [](const Points2& pred, const Points2& gt, const std::string& distance) {
        return metrics::mse_t(pixels(pred), pixels(gt), metrics::parse_distance(distance));
      }, py::arg("pred"), py::arg("gt"), py::arg("distance") = "euclidean",
      "Mean per-timestamp pixel distance between two [T x 2] trajectories.");

  m.def("project", [](const Matrix34& cam, const Points3& pts) {
        geometry::CameraMatrix c;
        c.m = cam;
        const geometry::CameraMatrixSequence seq(static_cast<std::size_t>(pts.rows()), c);
        const auto px = geometry::project_trajectory(seq, worlds(pts));
        Points2 out(pts.rows(), 2);
        for (std::size_t i = 0; i < px.size(); ++i) out.row(static_cast<Eigen::Index>(i)) << px[i].u, px[i].v;
        return out;
      }, py::arg("camera"), py::arg("points"), "Projects [N x 3] world points with one 3x4 camera matrix.");

  m.def("dlt_estimate", [](const Points3& world, const Points2& pixel) {
        if (world.rows() != pixel.rows()) throw Error(Errc::LengthMismatch, "world and pixel counts differ");
        std::vector<geometry::Correspondence> corr;
        for (Eigen::Index i = 0; i < world.rows(); ++i)
          corr.push_back({{world(i, 0), world(i, 1), world(i, 2)}, {pixel(i, 0), pixel(i, 1)}});
        return Matrix34(geometry::dlt_estimate(corr).m);
      }, py::arg("world"), py::arg("pixel"), "Normalized DLT camera estimate from >= 6 correspondences.");

  m.def("default_config", [] { return config::defaults().to_json().dump(); });
  m.def("resolve_config", [](const std::string& text) { return parse_config(text).to_json().dump(); });
  m.def("method_names", &pipeline::method_names);

  m.def("make_scene", [](const std::string& config_text, std::uint64_t seed) {
        return io::serialize_scene(sim::make_scene(parse_config(config_text).sim, seed));
      }, py::arg("config"), py::arg("seed"));

  m.def("simulate", [](const std::string& cfg, const std::filesystem::path& out) {
        return logged([&](std::ostream& log) { cmd::simulate(parse_config(cfg), out, log); });
      }, py::arg("config"), py::arg("out"));
  m.def("train", [](const std::string& cfg, const std::filesystem::path& dataset, const std::filesystem::path& out,
                    const std::vector<std::string>& methods) {
        return logged([&](std::ostream& log) { cmd::train(parse_config(cfg), dataset, out, {methods, false}, log); });
      }, py::arg("config"), py::arg("dataset"), py::arg("out"), py::arg("methods"));
  m.def("eval", [](const std::string& cfg, const std::filesystem::path& dataset, const std::filesystem::path& out,
                   const std::vector<std::string>& methods, const std::vector<std::filesystem::path>& checkpoints) {
        std::string csv;
        logged([&](std::ostream& log) { csv = metrics::to_csv(cmd::eval(parse_config(cfg), dataset, out, {methods, checkpoints, "test"}, log)); });
        return csv;
      }, py::arg("config"), py::arg("dataset"), py::arg("out"), py::arg("methods"), py::arg("checkpoints"));
}
