#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "emf/checkpoint.hpp"
#include "emf/config.hpp"
#include "emf/metrics.hpp"
#include "emf/samplers.hpp"
#include "emf/trainer.hpp"
#include "emf/validation.hpp"

namespace py = pybind11;
using namespace emf;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor tensor_from(const DArray& a) {
    if (a.ndim() == 1) {
        Tensor t({static_cast<std::size_t>(a.shape(0))});
        std::copy(a.data(), a.data() + a.size(), t.raw().begin());
        return t;
    }
    contract(a.ndim() == 2, "expected a 1-D or 2-D float array");
    Tensor t({static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))});
    std::copy(a.data(), a.data() + a.size(), t.raw().begin());
    return t;
}

py::array_t<double> array_from(const Tensor& t) {
    std::vector<py::ssize_t> shape;
    for (std::size_t d : t.shape()) shape.push_back(static_cast<py::ssize_t>(d));
    if (shape.empty()) shape.push_back(1);
    py::array_t<double> out(shape);
    std::copy(t.raw().begin(), t.raw().end(), out.mutable_data());
    return out;
}

DatasetConfig dataset_config(const std::string& kind, py::object scale, py::object noise_std,
                             py::object n_classes) {
    DatasetConfig cfg = default_dataset(dataset_kind_from_string(kind));
    if (!scale.is_none()) cfg.scale = scale.cast<double>();
    if (!noise_std.is_none()) cfg.noise_std = noise_std.cast<double>();
    if (!n_classes.is_none()) cfg.n_classes = n_classes.cast<int>();
    return cfg;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Euler mean-flow toy lab: training, sampling, metrics and validation primitives";

    py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);

    m.def(
        "sample_dataset",
        [](const std::string& kind, int n, std::uint64_t seed, py::object scale, py::object noise_std,
           py::object n_classes) -> py::object {
            DatasetConfig cfg = dataset_config(kind, scale, noise_std, n_classes);
            Rng rng(seed);
            DataBatch b = sample_data(cfg, rng, n);
            if (b.labels.empty()) return py::make_tuple(array_from(b.x), py::none());
            return py::make_tuple(array_from(b.x), py::cast(b.labels));
        },
        py::arg("kind"), py::arg("n"), py::arg("seed") = 0, py::arg("scale") = py::none(),
        py::arg("noise_std") = py::none(), py::arg("n_classes") = py::none(),
        "Draw n points from a toy dataset; returns (points, labels-or-None).");

    m.def(
        "energy_distance",
        [](const DArray& a, const DArray& b) { return energy_distance(tensor_from(a), tensor_from(b)); },
        py::arg("a"), py::arg("b"));
    m.def(
        "mmd_rbf",
        [](const DArray& a, const DArray& b, double sigma) {
            return mmd_rbf(tensor_from(a), tensor_from(b), sigma);
        },
        py::arg("a"), py::arg("b"), py::arg("sigma") = 0.0);
    m.def(
        "histogram_tv",
        [](const DArray& a, const DArray& b, std::array<double, 4> bounds, int bins) {
            return histogram_tv(tensor_from(a), tensor_from(b), bounds, bins);
        },
        py::arg("a"), py::arg("b"), py::arg("bounds"), py::arg("bins") = 50);

    m.def(
        "default_config",
        [](const std::string& objective, const std::string& dataset) {
            RunConfig cfg;
            cfg.objective = objective_from_string(objective);
            cfg.data = default_dataset(dataset_kind_from_string(dataset));
            cfg.resolve();
            return serialize_config(cfg);
        },
        py::arg("objective") = "emf_u", py::arg("dataset") = "eight_gaussians",
        "Canonical config text with defaults for the given objective/dataset.");

    m.def(
        "train",
        [](const std::string& config_text, const std::string& out_dir) {
            RunConfig cfg = parse_config(config_text);
            TrainResult res = train_run(cfg, out_dir, nullptr, /*quiet=*/true);
            py::list log;
            for (const TrainLogRow& r : res.log)
                log.append(py::make_tuple(r.step, r.loss_mean, r.loss_var, r.lc_eval));
            py::dict out;
            out["steps"] = res.steps_done;
            out["wall_seconds"] = res.wall_seconds;
            out["final_loss_mean"] = res.log.empty() ? 0.0 : res.log.back().loss_mean;
            out["final_consistency"] = res.log.empty() ? 0.0 : res.log.back().lc_eval;
            out["log"] = log;
            return out;
        },
        py::arg("config_text"), py::arg("out_dir") = "",
        "Run training from config text; optionally writes checkpoints/metrics to out_dir.");

    m.def(
        "sample_checkpoint",
        [](const std::string& path, int n, std::uint64_t seed, int steps, const std::string& protocol) {
            contract(protocol == "flow" || protocol == "ode", "protocol must be flow or ode");
            contract(n > 0 && steps >= 1, "n and steps must be positive");
            RestoredRun run = restore_run(load_checkpoint(path));
            FlowNetwork net = sampling_network(run);
            Rng rng(seed);
            Tensor x0 = Tensor::randn({static_cast<std::size_t>(n), 2}, rng);
            std::vector<int> cls;
            const std::vector<int>* clsp = nullptr;
            if (net.conditional()) {
                cls.resize(static_cast<std::size_t>(n));
                for (int i = 0; i < n; ++i) cls[static_cast<std::size_t>(i)] = rng.uniform_int(net.cfg.num_classes);
                clsp = &cls;
            }
            Tensor x = protocol == "flow" ? sample_k_step(net, x0, steps, clsp)
                                          : sample_ode(net, x0, steps, clsp);
            return array_from(x);
        },
        py::arg("path"), py::arg("n") = 2048, py::arg("seed") = 0, py::arg("steps") = 1,
        py::arg("protocol") = "flow", "Generate points from a saved checkpoint (EMA weights).");

    m.def(
        "assumption_constants",
        [](const std::string& path, int n1, int n2, std::uint64_t seed) {
            RestoredRun run = restore_run(load_checkpoint(path));
            ValidationConfig vc;
            vc.n1 = n1;
            vc.n2 = n2;
            vc.delta_t = run.cfg.obj.delta_t;
            Rng rng(seed);
            AssumptionReport rep = estimate_assumption_constants(run.net, run.cfg.data, vc, rng);
            py::dict out;
            out["m_g"] = rep.m_g;
            out["m_x"] = rep.m_x;
            out["m_t"] = rep.m_t;
            out["primed"] = rep.primed;
            out["prefactor_form"] = rep.prefactor_form;
            return out;
        },
        py::arg("path"), py::arg("n1") = 16, py::arg("n2") = 256, py::arg("seed") = 0);

    m.def(
        "estimate_spectral_norm",
        [](const DArray& mat, int n1, std::uint64_t seed) {
            Tensor a = tensor_from(mat);
            contract(a.ndim() == 2, "matrix expected");
            Rng rng(seed);
            auto action = [&a](const Tensor& v) {
                Tensor out({a.rows()});
                for (std::size_t i = 0; i < a.rows(); ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < a.cols(); ++j) s += a.at(i, j) * v[j];
                    out[i] = s;
                }
                return out;
            };
            return estimate_spectral_norm(action, a.cols(), n1, rng);
        },
        py::arg("mat"), py::arg("n1") = 64, py::arg("seed") = 0);

    m.def(
        "power_iteration_norm",
        [](const DArray& mat, int iters) { return power_iteration_norm(tensor_from(mat), iters); },
        py::arg("mat"), py::arg("iters") = 100);

    m.def(
        "gradcheck",
        [](int n_models, std::uint64_t seed) {
            GradcheckReport rep = run_gradcheck(n_models, seed);
            py::dict out;
            out["models"] = rep.models;
            out["max_rel_err_reverse"] = rep.max_rel_err_reverse;
            out["max_rel_err_jvp"] = rep.max_rel_err_jvp;
            out["pass"] = rep.pass;
            return out;
        },
        py::arg("n_models") = 20, py::arg("seed") = 0);
}
