#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/operators.h>
#include <pybind11/stl.h>

#include "jointdag/errors.hpp"
#include "jointdag/eval.hpp"
#include "jointdag/graph.hpp"
#include "jointdag/io.hpp"
#include "jointdag/refit.hpp"
#include "jointdag/scoring.hpp"
#include "jointdag/search.hpp"
#include "jointdag/sem.hpp"
#include "jointdag/version.hpp"

namespace py = pybind11;
using namespace jointdag;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Joint estimation of multiple directed Gaussian graphical models";
    m.attr("__version__") = kVersion;

    py::register_exception<Error>(m, "JointdagError");

    py::class_<Permutation>(m, "Permutation")
        .def(py::init<std::vector<int>>())
        .def_static("identity", &Permutation::identity)
        .def("position", &Permutation::position)
        .def("node_at", &Permutation::node_at)
        .def_property_readonly("order", &Permutation::order)
        .def("__len__", &Permutation::size)
        .def(py::self == py::self);

    py::class_<Dag>(m, "Dag")
        .def(py::init<int>())
        .def(py::init<int, const std::vector<Edge>&>())
        .def_property_readonly("p", &Dag::node_count)
        .def("edge_count", &Dag::edge_count)
        .def("edges", &Dag::edges)
        .def("has_edge", &Dag::has_edge)
        .def("parents", [](const Dag& d, int j) {
            return std::vector<int>(d.parents(j).begin(), d.parents(j).end());
        })
        .def("add_edge", &Dag::add_edge)
        .def(py::self == py::self)
        .def("__repr__", [](const Dag& d) {
            return "Dag(p=" + std::to_string(d.node_count()) + ", edges=" +
                   std::to_string(d.edge_count()) + ")";
        });

    py::class_<Pdag>(m, "Pdag")
        .def(py::init<int>())
        .def(py::init<int, const std::vector<Edge>&, const std::vector<Edge>&>(),
             py::arg("p"), py::arg("directed"), py::arg("undirected"))
        .def_static("from_dag", &Pdag::from_dag)
        .def_property_readonly("p", &Pdag::node_count)
        .def("edge_count", &Pdag::edge_count)
        .def("directed_count", &Pdag::directed_count)
        .def("undirected_count", &Pdag::undirected_count)
        .def("directed_edges", &Pdag::directed_edges)
        .def("undirected_edges", &Pdag::undirected_edges)
        .def("has_directed", &Pdag::has_directed)
        .def("has_undirected", &Pdag::has_undirected)
        .def("adjacent", &Pdag::adjacent)
        .def(py::self == py::self)
        .def("__repr__", [](const Pdag& g) {
            return "Pdag(p=" + std::to_string(g.node_count()) + ", directed=" +
                   std::to_string(g.directed_count()) + ", undirected=" +
                   std::to_string(g.undirected_count()) + ")";
        });

    m.def("topological_order", &topological_order);
    m.def("skeleton_vstructures", [](const Dag& d) {
        const auto sv = skeleton_vstructures(d);
        return py::make_tuple(std::vector<Edge>(sv.skeleton.begin(), sv.skeleton.end()),
                              std::vector<std::array<int, 3>>(sv.vstructures.begin(),
                                                              sv.vstructures.end()));
    });
    m.def("complete_to_cpdag", &complete_to_cpdag);
    m.def("consistent_extension", &consistent_extension);
    m.def("enumerate_class", [](const Pdag& g, std::size_t cap) {
        const auto res = enumerate_class(g, cap);
        return py::make_tuple(res.dags, res.truncated);
    }, py::arg("cpdag"), py::arg("cap") = 1024);
    m.def("is_valid_cpdag", &is_valid_cpdag);
    m.def("shd", py::overload_cast<const Dag&, const Dag&>(&shd));
    m.def("shd", py::overload_cast<const Pdag&, const Pdag&>(&shd));
    m.def("shd", py::overload_cast<const Dag&, const Pdag&>(&shd));
    m.def("shd", py::overload_cast<const Pdag&, const Dag&>(&shd));
    m.def("union_graph", &union_graph);
    m.def("hub_nodes", &hub_nodes, py::arg("union_dag"), py::arg("min_total_degree") = 5);

    py::class_<SemModel>(m, "SemModel")
        .def(py::init<Eigen::MatrixXd, Eigen::VectorXd>(), py::arg("coeffs"),
             py::arg("noise_var"))
        .def_readonly("coeffs", &SemModel::coeffs)
        .def_readonly("noise_var", &SemModel::noise_var)
        .def("dag", &SemModel::dag)
        .def_property_readonly("p", &SemModel::node_count);

    py::class_<CovariancePair>(m, "CovariancePair")
        .def_readonly("sigma", &CovariancePair::sigma)
        .def_readonly("theta", &CovariancePair::theta);

    m.def("precision_from_sem", &precision_from_sem);
    m.def("cholesky_sem", &cholesky_sem);
    m.def("sample", [](const SemModel& model, int n, std::uint64_t seed) {
        Rng rng(seed);
        return sample(model, n, rng);
    }, py::arg("model"), py::arg("n"), py::arg("seed"));
    m.def("apply_intervention", &apply_intervention, py::arg("model"), py::arg("targets"),
          py::arg("new_variances"));

    py::class_<Interval>(m, "Interval")
        .def(py::init([](double lo, double hi) { return Interval{lo, hi}; }))
        .def_readwrite("lo", &Interval::lo)
        .def_readwrite("hi", &Interval::hi);

    py::class_<JointModelConfig>(m, "JointModelConfig")
        .def(py::init<>())
        .def_readwrite("p", &JointModelConfig::p)
        .def_readwrite("K", &JointModelConfig::K)
        .def_readwrite("core_edges", &JointModelConfig::core_edges)
        .def_readwrite("extra_edges", &JointModelConfig::extra_edges)
        .def_readwrite("weight_range", &JointModelConfig::weight_range)
        .def_readwrite("variance_range", &JointModelConfig::variance_range)
        .def_readwrite("seed", &JointModelConfig::seed)
        .def_readwrite("lock_shared_weights", &JointModelConfig::lock_shared_weights);

    m.def("random_joint_model", [](const JointModelConfig& cfg, std::uint64_t seed) {
        Rng rng(seed);
        const JointModel jm = random_joint_model(cfg, rng);
        return py::make_tuple(jm.dags, jm.sems);
    }, py::arg("config"), py::arg("seed"));

    py::class_<InterventionSpec>(m, "InterventionSpec")
        .def(py::init<std::vector<std::vector<int>>, int>(), py::arg("targets"), py::arg("p"))
        .def_readonly("targets", &InterventionSpec::targets);

    py::class_<MultiDataset>(m, "MultiDataset")
        .def(py::init<std::vector<Eigen::MatrixXd>, InterventionSpec, bool>(),
             py::arg("classes"), py::arg("interventions") = InterventionSpec{},
             py::arg("center") = true)
        .def_property_readonly("p", &MultiDataset::node_count)
        .def_property_readonly("K", &MultiDataset::class_count)
        .def("rows", &MultiDataset::rows)
        .def("total_rows", &MultiDataset::total_rows)
        .def("weight", &MultiDataset::weight)
        .def("data", &MultiDataset::data, py::return_value_policy::copy);

    py::class_<ScoreConfig>(m, "ScoreConfig")
        .def(py::init<>())
        .def_readwrite("lambda1_sq", &ScoreConfig::lambda1_sq)
        .def_readwrite("scaling_c", &ScoreConfig::scaling_c)
        .def_readwrite("max_in_degree", &ScoreConfig::max_in_degree)
        .def_readwrite("rss_floor", &ScoreConfig::rss_floor);

    m.def("ols_rss", [](const MultiDataset& data, int k, int j, const std::vector<int>& parents,
                        const ScoreConfig& cfg) { return ols_rss(data, k, j, parents, cfg); },
          py::arg("data"), py::arg("k"), py::arg("j"), py::arg("parents"),
          py::arg("config") = ScoreConfig{});
    m.def("local_score", &local_score, py::arg("data"), py::arg("j"), py::arg("parents"),
          py::arg("config"));
    m.def("graph_score",
          py::overload_cast<const MultiDataset&, const Dag&, const ScoreConfig&>(&graph_score),
          py::arg("data"), py::arg("graph"), py::arg("config"));
    m.def("interventional_local_score", &interventional_local_score, py::arg("data"),
          py::arg("j"), py::arg("parents"), py::arg("config"));
    m.def("interventional_graph_score", &interventional_graph_score, py::arg("data"),
          py::arg("graph"), py::arg("config"));
    m.def("sem_log_likelihood", &sem_log_likelihood, py::arg("data"), py::arg("model"));

    py::class_<SearchConfig>(m, "SearchConfig")
        .def(py::init<>())
        .def_readwrite("max_in_degree", &SearchConfig::max_in_degree)
        .def_readwrite("iterate_phases", &SearchConfig::iterate_phases)
        .def_readwrite("epsilon_improve", &SearchConfig::epsilon_improve)
        .def_readwrite("max_moves", &SearchConfig::max_moves);

    py::class_<SearchMove>(m, "SearchMove")
        .def_property_readonly("kind", [](const SearchMove& mv) {
            return mv.kind == SearchMove::Kind::insert ? "insert" : "delete";
        })
        .def_readonly("x", &SearchMove::x)
        .def_readonly("y", &SearchMove::y)
        .def_readonly("subset", &SearchMove::subset)
        .def_readonly("score_before", &SearchMove::score_before)
        .def_readonly("score_after", &SearchMove::score_after);

    py::class_<SearchTrace>(m, "SearchTrace")
        .def_readonly("initial_score", &SearchTrace::initial_score)
        .def_readonly("final_score", &SearchTrace::final_score)
        .def_readonly("moves", &SearchTrace::moves)
        .def_readonly("move_limit_hit", &SearchTrace::move_limit_hit);

    py::class_<GesResult>(m, "GesResult")
        .def_readonly("cpdag", &GesResult::cpdag)
        .def_readonly("trace", &GesResult::trace);

    m.def("ges_fit", &ges_fit, py::arg("data"), py::arg("score_config"),
          py::arg("search_config") = SearchConfig{});
    m.def("separate_fit", &separate_fit, py::arg("data"), py::arg("score_config"),
          py::arg("search_config") = SearchConfig{});
    m.def("gies_fit", &gies_fit, py::arg("data"), py::arg("score_config"),
          py::arg("search_config") = SearchConfig{});
    m.def("exhaustive_best_dag", &exhaustive_best_dag, py::arg("data"),
          py::arg("score_config"), py::arg("max_p") = 5);
    m.def("best_scoring_extension_interventional",
          [](const Pdag& cpdag, const MultiDataset& data, const ScoreConfig& cfg,
             std::size_t cap) {
              const InterventionalScorer scorer(data, cfg);
              return best_scoring_extension(cpdag, scorer, cap);
          },
          py::arg("cpdag"), py::arg("data"), py::arg("config"), py::arg("cap") = 256);

    py::class_<LassoConfig>(m, "LassoConfig")
        .def(py::init<>())
        .def_readwrite("lambda2", &LassoConfig::lambda2)
        .def_readwrite("grid_size", &LassoConfig::grid_size)
        .def_readwrite("grid_min_ratio", &LassoConfig::grid_min_ratio)
        .def_readwrite("cv_folds", &LassoConfig::cv_folds)
        .def_readwrite("tol", &LassoConfig::tol)
        .def_readwrite("max_iters", &LassoConfig::max_iters)
        .def_readwrite("seed", &LassoConfig::seed)
        .def_readwrite("standardize", &LassoConfig::standardize);

    m.def("lasso_cd", [](const Eigen::VectorXd& y, const Eigen::MatrixXd& xp, double lambda2,
                         const LassoConfig& cfg) {
        const LassoResult res = lasso_cd(y, xp, lambda2, cfg);
        return py::make_tuple(res.coef, res.converged, res.iterations);
    }, py::arg("y"), py::arg("x"), py::arg("lambda2"), py::arg("config") = LassoConfig{});
    m.def("lambda2_grid", &lambda2_grid, py::arg("y"), py::arg("x"), py::arg("size") = 50,
          py::arg("min_ratio") = 1e-3);
    m.def("cv_lambda2", &cv_lambda2, py::arg("y"), py::arg("x"), py::arg("grid"),
          py::arg("folds"), py::arg("seed"), py::arg("config") = LassoConfig{});

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("union_dag", &FitResult::union_dag)
        .def_readonly("per_class", &FitResult::per_class)
        .def_readonly("trace", &FitResult::trace)
        .def_readonly("chosen_lambda2", &FitResult::chosen_lambda2)
        .def("class_dags", &FitResult::class_dags)
        .def("total_class_edges", &FitResult::total_class_edges);

    m.def("refit_classes", &refit_classes, py::arg("data"), py::arg("union_dag"),
          py::arg("config"), py::arg("jobs") = 1);
    m.def("sparsest_extension_refit", &sparsest_extension_refit, py::arg("data"),
          py::arg("cpdag"), py::arg("config"), py::arg("cap"), py::arg("exact") = true,
          py::arg("jobs") = 1);
    m.def("refit_interventional", &refit_interventional, py::arg("data"), py::arg("union_dag"),
          py::arg("config"), py::arg("jobs") = 1);

    py::class_<Confusion>(m, "Confusion")
        .def_readonly("tp", &Confusion::tp)
        .def_readonly("fp", &Confusion::fp)
        .def_readonly("fn", &Confusion::fn)
        .def_readonly("tn", &Confusion::tn)
        .def("tpr", &Confusion::tpr)
        .def("fpr", &Confusion::fpr);

    m.def("confusion", py::overload_cast<const Dag&, const Dag&>(&confusion));
    m.def("confusion", py::overload_cast<const Pdag&, const Pdag&>(&confusion));

    py::class_<PipelineConfig>(m, "PipelineConfig")
        .def(py::init<>())
        .def_readwrite("score", &PipelineConfig::score)
        .def_readwrite("search", &PipelineConfig::search)
        .def_readwrite("lasso", &PipelineConfig::lasso);

    m.def("joint_pipeline", &joint_pipeline, py::arg("data"), py::arg("c"),
          py::arg("pipeline") = PipelineConfig{}, py::arg("lasso_seed") = 0,
          py::arg("jobs") = 1);

    py::class_<StabilityResult>(m, "StabilityResult")
        .def_readonly("class_freq", &StabilityResult::class_freq)
        .def_readonly("union_freq", &StabilityResult::union_freq)
        .def_readonly("class_selected", &StabilityResult::class_selected)
        .def_readonly("union_selected", &StabilityResult::union_selected)
        .def_readonly("subsamples", &StabilityResult::subsamples);

    m.def("stability_selection", &stability_selection, py::arg("data"), py::arg("pipeline"),
          py::arg("subsamples"), py::arg("fraction"), py::arg("threshold"), py::arg("seed"),
          py::arg("jobs") = 1);
}
