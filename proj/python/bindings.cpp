#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <vector>

#include "mup/cli.hpp"
#include "mup/config.hpp"
#include "mup/error.hpp"
#include "mup/linalg.hpp"
#include "mup/model.hpp"
#include "mup/optim.hpp"
#include "mup/scaling.hpp"
#include "mup/sweep.hpp"
#include "mup/trainer.hpp"

namespace py = pybind11;
using namespace mup;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix from_numpy(const Array& a) {
  if (a.ndim() == 1) {
    std::vector<double> v(a.data(), a.data() + a.shape(0));
    return Matrix(v.size(), 1, std::move(v));
  }
  if (a.ndim() != 2) throw InvalidArgument("expected a 1-d or 2-d array");
  const auto r = static_cast<std::size_t>(a.shape(0));
  const auto c = static_cast<std::size_t>(a.shape(1));
  return Matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

Array to_numpy(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

ExperimentConfig make_config(const py::dict& settings) {
  ExperimentConfig cfg;
  for (auto [k, v] : settings) {
    std::string value;
    if (py::isinstance<py::list>(v) || py::isinstance<py::tuple>(v)) {
      for (auto item : v) value += (value.empty() ? "" : ",") + py::str(item).cast<std::string>();
    } else {
      value = py::str(v).cast<std::string>();
    }
    apply_setting(cfg, py::str(k).cast<std::string>(), value);
  }
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Width-aware parameterization of MLPs: scaling rules, optimizers and diagnostics.";
  tune_allocator();

  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

  py::enum_<OptimizerKind>(m, "OptimizerKind")
      .value("AdamW", OptimizerKind::AdamW)
      .value("Adopt", OptimizerKind::Adopt)
      .value("Lamb", OptimizerKind::Lamb)
      .value("Sophia", OptimizerKind::Sophia)
      .value("Shampoo", OptimizerKind::Shampoo)
      .value("Muon", OptimizerKind::Muon);
  py::enum_<ParamScheme>(m, "ParamScheme").value("SP", ParamScheme::SP).value("MuP", ParamScheme::MuP);
  py::enum_<LayerRole>(m, "LayerRole")
      .value("Input", LayerRole::Input)
      .value("Hidden", LayerRole::Hidden)
      .value("Output", LayerRole::Output);
  py::enum_<Activation>(m, "Activation")
      .value("Identity", Activation::Identity)
      .value("ReLU", Activation::ReLU)
      .value("Tanh", Activation::Tanh);
  py::enum_<LossKind>(m, "LossKind").value("MSE", LossKind::MSE).value("SoftmaxCE", LossKind::SoftmaxCE);

  m.def("parse_optimizer", [](const std::string& s) { return parse_optimizer(s); });
  m.def("parse_scheme", [](const std::string& s) { return parse_scheme(s); });

  py::class_<LayerSpec>(m, "LayerSpec")
      .def(py::init<std::size_t, std::size_t, LayerRole, bool, bool>(), py::arg("fan_in"), py::arg("fan_out"),
           py::arg("role"), py::arg("width_scaled_in") = true, py::arg("width_scaled_out") = true)
      .def_readwrite("fan_in", &LayerSpec::fan_in)
      .def_readwrite("fan_out", &LayerSpec::fan_out)
      .def_readwrite("role", &LayerSpec::role)
      .def_readwrite("width_scaled_in", &LayerSpec::width_scaled_in)
      .def_readwrite("width_scaled_out", &LayerSpec::width_scaled_out)
      .def("__repr__", [](const LayerSpec& s) {
        return "LayerSpec(" + std::to_string(s.fan_in) + " -> " + std::to_string(s.fan_out) + ", " +
               std::string(to_string(s.role)) + ")";
      });

  py::class_<ScalingRule>(m, "ScalingRule")
      .def_readonly("init_std", &ScalingRule::init_std)
      .def_readonly("weight_mult", &ScalingRule::weight_mult)
      .def_readonly("lr_mult", &ScalingRule::lr_mult)
      .def_readonly("eps_mult", &ScalingRule::eps_mult)
      .def_readonly("wd_mult", &ScalingRule::wd_mult);

  m.def("mlp_specs", &mlp_specs, py::arg("input_dim"), py::arg("width"), py::arg("output_dim"), py::arg("depth"));
  m.def("derive_rule", &derive_rule, py::arg("kind"), py::arg("layer"), py::arg("scheme") = ParamScheme::MuP);
  m.def(
      "rule_table",
      [](OptimizerKind kind, const std::vector<std::size_t>& widths, std::size_t depth, ParamScheme scheme) {
        return rule_table(kind, widths, depth, scheme);
      },
      py::arg("kind"), py::arg("widths"), py::arg("depth") = 4, py::arg("scheme") = ParamScheme::MuP);

  // linalg
  m.def("spectral_norm", [](const Array& a) { return spectral_norm(from_numpy(a)).value; });
  m.def("singular_values", [](const Array& a) { return singular_values(from_numpy(a)); });
  m.def(
      "numerical_rank", [](const Array& a, double tol) { return numerical_rank(from_numpy(a), tol); },
      py::arg("a"), py::arg("rank_tol") = kDefaultRankTol);
  m.def("newton_schulz_orthogonalize", [](const Array& a) {
    return to_numpy(newton_schulz_orthogonalize(from_numpy(a)).value);
  });
  m.def(
      "matrix_fractional_power",
      [](const Array& a, double p) { return to_numpy(matrix_fractional_power(from_numpy(a), p)); }, py::arg("s"),
      py::arg("p"));

  py::class_<Mlp>(m, "Mlp")
      .def_property_readonly("depth", &Mlp::depth)
      .def_property_readonly("input_dim", &Mlp::input_dim)
      .def_property_readonly("output_dim", &Mlp::output_dim)
      .def("spec", [](const Mlp& mlp, std::size_t l) { return mlp.layer(l).spec; })
      .def("multiplier", [](const Mlp& mlp, std::size_t l) { return mlp.layer(l).multiplier; })
      .def("effective_weight", [](const Mlp& mlp, std::size_t l) { return to_numpy(mlp.effective_weight(l)); })
      .def("forward", [](const Mlp& mlp, const Array& x) { return to_numpy(forward(mlp, from_numpy(x)).output()); })
      .def(
          "gradients",
          [](const Mlp& mlp, const Array& x, const Array& y, LossKind kind) {
            double l = 0.0;
            const Grads g = gradients(mlp, from_numpy(x), from_numpy(y), kind, &l);
            py::list out;
            for (const Matrix& w : g.weights) out.append(to_numpy(w));
            return py::make_tuple(l, out);
          },
          py::arg("x"), py::arg("y"), py::arg("loss") = LossKind::MSE);

  m.def(
      "build",
      [](const std::vector<LayerSpec>& specs, ParamScheme scheme, OptimizerKind kind, std::uint64_t seed,
         Activation act) { return build(specs, scheme, kind, seed, act); },
      py::arg("specs"), py::arg("scheme") = ParamScheme::MuP, py::arg("kind") = OptimizerKind::AdamW,
      py::arg("seed") = 0, py::arg("activation") = Activation::ReLU);

  py::class_<HyperParams>(m, "HyperParams")
      .def(py::init<>())
      .def_readwrite("eta", &HyperParams::eta)
      .def_readwrite("beta1", &HyperParams::beta1)
      .def_readwrite("beta2", &HyperParams::beta2)
      .def_readwrite("eps", &HyperParams::eps)
      .def_readwrite("weight_decay", &HyperParams::weight_decay)
      .def_readwrite("gamma", &HyperParams::gamma)
      .def_readwrite("delta", &HyperParams::delta)
      .def_readwrite("mu", &HyperParams::mu)
      .def_readwrite("ns_iters", &HyperParams::ns_iters)
      .def_readwrite("hess_interval", &HyperParams::hess_interval);

  py::class_<Trainer>(m, "Trainer")
      .def(py::init<Mlp, OptimizerKind, ParamScheme, HyperParams, LossKind, std::uint64_t>(), py::arg("mlp"),
           py::arg("kind"), py::arg("scheme") = ParamScheme::MuP, py::arg("hp") = HyperParams{},
           py::arg("loss") = LossKind::MSE, py::arg("seed") = 0)
      .def(
          "step",
          [](Trainer& t, const Array& x, const Array& y) {
            double l = 0.0;
            t.step(from_numpy(x), from_numpy(y), &l);
            return l;
          },
          "One optimizer step; returns the batch loss before the update.")
      .def("evaluate", [](const Trainer& t, const Array& x, const Array& y) {
        return t.evaluate(from_numpy(x), from_numpy(y));
      })
      .def_property_readonly("model", &Trainer::model)
      .def_property_readonly("steps", [](const Trainer& t) { return t.state().step; });

  // harness; `settings` maps config keys to values, lists become comma lists
  m.def(
      "lr_sweep",
      [](const py::dict& settings) {
        const ExperimentConfig cfg = make_config(settings);
        std::vector<ResultRow> rows;
        {
          py::gil_scoped_release release;
          rows = run_lr_sweep(cfg);
        }
        py::list out;
        for (const ResultRow& r : rows)
          out.append(py::dict(py::arg("width") = r.width, py::arg("lr") = r.lr, py::arg("seed") = r.seed,
                              py::arg("steps") = r.steps, py::arg("train_loss") = r.train_loss,
                              py::arg("val_loss") = r.val_loss, py::arg("diverged") = r.diverged));
        return out;
      },
      py::arg("settings") = py::dict());
  m.def(
      "coord_check",
      [](const py::dict& settings) {
        const ExperimentConfig cfg = make_config(settings);
        std::vector<CoordCheckRecord> recs;
        {
          py::gil_scoped_release release;
          recs = run_coord_check(cfg, make_task(cfg));
        }
        py::list out;
        for (const CoordCheckRecord& r : recs)
          out.append(py::dict(py::arg("width") = r.width, py::arg("step") = r.step, py::arg("layer") = r.layer,
                              py::arg("rms_coord") = r.rms_coord, py::arg("rel_to_first") = r.rel_to_first,
                              py::arg("diverged") = r.diverged));
        return out;
      },
      py::arg("settings") = py::dict());
  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  });
}
