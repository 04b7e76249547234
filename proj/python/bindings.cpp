#include "mpmedit/cli_app.hpp"
#include "mpmedit/errors.hpp"
#include "mpmedit/intervention_scheduler.hpp"
#include "mpmedit/material_field.hpp"
#include "mpmedit/physics_supervision.hpp"
#include "mpmedit/semantic_conditioning.hpp"
#include "mpmedit/trajectory_export.hpp"
#include "mpmedit/volumetric_fill.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace mpmedit;

namespace {

using RowPoints = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

std::vector<Vec3> to_points(const Eigen::Ref<const RowPoints>& m) {
  std::vector<Vec3> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m.row(i).transpose();
  return out;
}

RowPoints from_points(const std::vector<Vec3>& pts) {
  RowPoints m(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return m;
}

template <class T>
py::array_t<T> to_array(const std::vector<T>& v) {
  py::array_t<T> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

py::dict field_dict(const MaterialField& f) {
  py::dict d;
  d["positions"] = from_points(f.positions);
  d["class_id"] = to_array(f.class_id);
  d["young_modulus"] = to_array(f.young_modulus);
  d["poisson_ratio"] = to_array(f.poisson_ratio);
  d["density"] = to_array(f.density);
  d["interior"] = to_array(f.interior_flag);
  if (f.has_part_labels()) d["part_label"] = to_array(f.part_label);
  return d;
}

SupervisionTargets make_targets(const std::vector<std::int32_t>& classes, const MatrixX& params,
                                const std::vector<std::int32_t>& parts,
                                const std::map<std::int32_t, std::int32_t>& prompt_of_part) {
  SupervisionTargets t;
  t.class_labels = classes;
  t.params = params;
  t.part_labels = parts;
  t.prompt_of_part = prompt_of_part;
  return t;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Material fields, volumetric fill, MPM simulation and trajectory tools.";

  static py::exception<Error> error_type(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(py::str(std::string(e.name()) + ": " + e.what()));
      exc.attr("code") = static_cast<int>(e.code());
      exc.attr("name") = std::string(e.name());
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def(
      "wave_speeds",
      [](double young, double poisson, double density) {
        const auto w = wave_speeds(young, poisson, density);
        return py::make_tuple(w.c_p, w.c_s);
      },
      py::arg("young"), py::arg("poisson"), py::arg("density"), "(c_p, c_s) in m/s.");

  m.def(
      "derive_moduli",
      [](double young, double poisson) {
        const auto d = derive_moduli(young, poisson);
        py::dict r;
        r["mu"] = d.mu;
        r["kappa"] = d.kappa;
        r["lambda"] = d.lame_lambda;
        return r;
      },
      py::arg("young"), py::arg("poisson"));

  m.def(
      "decode_field",
      [](const MatrixX& probs, const MatrixX& params, const Eigen::Ref<const RowPoints>& positions) {
        return field_dict(decode_material_field(probs, params, to_points(positions)));
      },
      py::arg("class_probs"), py::arg("params"), py::arg("positions"));

  m.def(
      "fill_interior",
      [](const Eigen::Ref<const RowPoints>& surface, double spacing, const std::string& inside_test, int knn,
         double clearance) {
        FillConfig cfg;
        cfg.spacing = spacing;
        cfg.inside_test = parse_inside_test(inside_test);
        cfg.knn_k = knn;
        cfg.surface_clearance = clearance;
        const auto f = MaterialField::uniform(to_points(surface), MaterialClass::Elastic, 1e5, 0.3, 1000.0);
        return from_points(fill_interior(f, cfg));
      },
      py::arg("surface"), py::arg("spacing"), py::arg("inside_test") = "voxel_flood", py::arg("knn") = 1,
      py::arg("clearance") = 0.25, "Interior lattice points of a closed surface sample set.");

  m.def(
      "soft_assign",
      [](const MatrixX& point_features, const MatrixX& part_tokens, const MatrixX& point_proj,
         const MatrixX& prompt_proj, const MatrixX& value_proj, double temperature) {
        FeatureBundle b;
        b.point_features = point_features;
        b.global_token = MatrixX::Zero(1, part_tokens.cols());
        b.part_tokens = part_tokens;
        b.point_proj = point_proj;
        b.prompt_proj = prompt_proj;
        b.value_proj = value_proj;
        b.temperature = temperature;
        const auto r = soft_assign(b);
        py::dict d;
        d["raw_logits"] = r.raw_logits;
        d["weights"] = r.weights;
        d["refined"] = r.refined;
        return d;
      },
      py::arg("point_features"), py::arg("part_tokens"), py::arg("point_proj"), py::arg("prompt_proj"),
      py::arg("value_proj"), py::arg("temperature") = 0.07);

  m.def(
      "task_loss",
      [](const MatrixX& probs, const MatrixX& params, const std::vector<std::int32_t>& labels,
         const MatrixX& target_params) {
        return task_loss(probs, params, make_targets(labels, target_params, {}, {}), LossWeights{});
      },
      py::arg("class_probs"), py::arg("params"), py::arg("class_labels"), py::arg("target_params"));

  m.def(
      "assignment_loss",
      [](const MatrixX& raw_logits, const std::vector<std::int32_t>& parts,
         const std::map<std::int32_t, std::int32_t>& prompt_of_part, double tau) {
        SupervisionTargets t = make_targets(std::vector<std::int32_t>(parts.size(), 0),
                                            MatrixX::Zero(static_cast<Eigen::Index>(parts.size()), 3), parts,
                                            prompt_of_part);
        return assignment_loss(raw_logits, t, tau);
      },
      py::arg("raw_logits"), py::arg("part_labels"), py::arg("prompt_of_part"), py::arg("temperature") = 0.07);

  m.def(
      "ramp_value",
      [](double v_from, double v_to, double t, double duration, const std::string& scale) {
        RampScale s;
        if (scale == "linear") s = RampScale::Linear;
        else if (scale == "log") s = RampScale::Log;
        else fail(ErrorCode::ConfigError, "scale must be 'linear' or 'log'");
        return ramp_value(v_from, v_to, t, duration, s);
      },
      py::arg("v_from"), py::arg("v_to"), py::arg("t"), py::arg("duration"), py::arg("scale") = "linear");

  m.def(
      "rasterize",
      [](const Eigen::Ref<const RowPoints>& positions, const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
         int width, int height, double fov_y_deg, int radius) {
        auto cam = CameraSpec::look_at(eye, target, Vec3(0, 1, 0), width, height, fov_y_deg);
        cam.splat_radius = radius;
        const auto img = rasterize_frame(to_points(positions), cam);
        py::array_t<std::uint8_t> out({height, width, 3});
        std::copy(img.rgb.begin(), img.rgb.end(), out.mutable_data());
        return out;
      },
      py::arg("positions"), py::arg("eye"), py::arg("target"), py::arg("width") = 64, py::arg("height") = 64,
      py::arg("fov_y_deg") = 45.0, py::arg("radius") = 1, "Depth-shaded RGB splat image, H x W x 3.");

  m.def(
      "load_trajectory",
      [](const std::string& dir) {
        const auto traj = import_trajectory(dir);
        const auto n = static_cast<py::ssize_t>(traj.particle_count());
        py::array_t<float> pos({static_cast<py::ssize_t>(traj.frames.size()), n, py::ssize_t{3}});
        std::vector<double> times;
        float* dst = pos.mutable_data();
        for (const auto& f : traj.frames) {
          dst = std::copy(f.positions.begin(), f.positions.end(), dst);
          times.push_back(f.time);
        }
        py::dict d;
        d["fps"] = traj.fps;
        d["positions"] = pos;
        d["times"] = to_array(times);
        d["object_id"] = to_array(traj.object_id);
        return d;
      },
      py::arg("directory"), "Frames of an exported trajectory as an F x N x 3 float32 array.");

  m.def(
      "verify",
      [](const std::string& dir) {
        const auto r = verify_trajectory(dir);
        py::dict d;
        d["ok"] = r.ok;
        d["files_checked"] = r.files_checked;
        d["problems"] = r.problems;
        return d;
      },
      py::arg("directory"));

  m.def(
      "_run",
      [](const std::string& command, const std::string& input, const std::string& output,
         const std::map<std::string, std::string>& options) {
        RunConfig c;
        if (command == "fill") c.command = Subcommand::Fill;
        else if (command == "simulate") c.command = Subcommand::Simulate;
        else if (command == "analyze") c.command = Subcommand::Analyze;
        else if (command == "verify") c.command = Subcommand::Verify;
        else fail(ErrorCode::ConfigError, "unknown command '" + command + "'");
        c.input = input;
        c.output = output;
        for (const auto& [k, v] : options) set_config_value(c, k, v);
        std::ostringstream out, err;
        int rc;
        {
          py::gil_scoped_release release;
          rc = run(c, out, err);
        }
        return py::make_tuple(rc, out.str(), err.str());
      },
      py::arg("command"), py::arg("input"), py::arg("output"), py::arg("options"));
}
