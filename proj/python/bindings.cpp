#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "appealnet/collab.hpp"
#include "appealnet/config.hpp"
#include "appealnet/data.hpp"
#include "appealnet/losses.hpp"
#include "appealnet/model.hpp"
#include "appealnet/trainer.hpp"

namespace py = pybind11;
using namespace appealnet;

PYBIND11_MODULE(_appealnet, m) {
  m.doc() =
      "Two-head approximator/predictor training and threshold-based "
      "edge/cloud routing simulation";

  py::enum_<TaskKind>(m, "TaskKind")
      .value("Classification", TaskKind::Classification)
      .value("Regression", TaskKind::Regression);

  py::enum_<SynthKind>(m, "SynthKind")
      .value("GaussianBlobs", SynthKind::GaussianBlobs)
      .value("ConcentricRings", SynthKind::ConcentricRings)
      .value("RegressionSurface", SynthKind::RegressionSurface);

  py::class_<HeteroNoise>(m, "HeteroNoise")
      .def(py::init<>())
      .def_readwrite("scaled_dim", &HeteroNoise::scaled_dim)
      .def_readwrite("gate_dim", &HeteroNoise::gate_dim)
      .def_readwrite("lo", &HeteroNoise::lo)
      .def_readwrite("hi", &HeteroNoise::hi)
      .def_readwrite("sharpness", &HeteroNoise::sharpness)
      .def_readwrite("gate_offset", &HeteroNoise::gate_offset)
      .def_readwrite("classes", &HeteroNoise::classes);

  py::class_<SynthSpec>(m, "SynthSpec")
      .def(py::init<>())
      .def_readwrite("kind", &SynthSpec::kind)
      .def_readwrite("n", &SynthSpec::n)
      .def_readwrite("d", &SynthSpec::d)
      .def_readwrite("k", &SynthSpec::k)
      .def_readwrite("overlap", &SynthSpec::overlap)
      .def_readwrite("noise_std", &SynthSpec::noise_std)
      .def_readwrite("seed", &SynthSpec::seed)
      .def_readwrite("centers", &SynthSpec::centers)
      .def_readwrite("blobs_per_class", &SynthSpec::blobs_per_class)
      .def_readwrite("hetero", &SynthSpec::hetero);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("task", &Dataset::task)
      .def_readonly("n", &Dataset::n)
      .def_readonly("d", &Dataset::d)
      .def_readonly("features", &Dataset::features)
      .def_readonly("labels", &Dataset::labels)
      .def_readonly("num_classes", &Dataset::num_classes)
      .def_readonly("targets", &Dataset::targets)
      .def_readonly("target_dim", &Dataset::target_dim)
      .def_readonly("split", &Dataset::split);

  m.def("generate", &generate, py::arg("spec"),
        "Generate a seed-deterministic synthetic (train, test) pair");
  m.def("std_synth", &std_synth, py::arg("seed"));
  m.def("reg_synth", &reg_synth, py::arg("seed"));
  m.def("reg_synth_err_threshold", &reg_synth_err_threshold);
  m.def("one_hot", &one_hot, py::arg("label"), py::arg("k"));

  py::class_<ArchSpec>(m, "ArchSpec")
      .def(py::init<>())
      .def_readwrite("input_dim", &ArchSpec::input_dim)
      .def_readwrite("extractor_widths", &ArchSpec::extractor_widths)
      .def_readwrite("approx_widths", &ArchSpec::approx_widths)
      .def_readwrite("task", &ArchSpec::task)
      .def("describe", &ArchSpec::describe);

  m.def("count_flops", &count_flops, py::arg("spec"),
        py::arg("include_predictor") = true);
  m.def("profile_select", &profile_select, py::arg("pool"),
        py::arg("budget_flops"), py::arg("include_predictor") = true);

  py::class_<NetOutputs>(m, "NetOutputs")
      .def_readonly("n", &NetOutputs::n)
      .def_readonly("k", &NetOutputs::k)
      .def_readonly("probs", &NetOutputs::probs)
      .def_readonly("q", &NetOutputs::q);

  py::class_<ApproximatorNet>(m, "ApproximatorNet")
      .def_static("init", &ApproximatorNet::init, py::arg("spec"), py::arg("seed"))
      .def_property_readonly("spec", &ApproximatorNet::spec)
      .def("infer", &ApproximatorNet::infer, py::arg("features"), py::arg("n"),
           py::arg("d"));

  py::class_<TwoHeadNet>(m, "TwoHeadNet")
      .def_property_readonly("spec", &TwoHeadNet::spec)
      .def("infer", &TwoHeadNet::infer, py::arg("features"), py::arg("n"),
           py::arg("d"));

  m.def("insert_predictor_head", &insert_predictor_head, py::arg("pretrained"),
        py::arg("seed"));

  py::class_<BigModel>(m, "BigModel")
      .def_static("white_box", &BigModel::white_box)
      .def_static("oracle", &BigModel::oracle)
      .def_property_readonly("is_oracle", &BigModel::is_oracle);

  m.def("save_checkpoint",
        py::overload_cast<const ApproximatorNet&, const std::string&>(&save_checkpoint));
  m.def("save_checkpoint",
        py::overload_cast<const TwoHeadNet&, const std::string&>(&save_checkpoint));
  m.def("load_approximator", &load_approximator);
  m.def("load_two_head", &load_two_head);

  py::class_<LossBreakdown>(m, "LossBreakdown")
      .def_readonly("l_p", &LossBreakdown::l_p)
      .def_readonly("l_q", &LossBreakdown::l_q)
      .def_readonly("total", &LossBreakdown::total)
      .def_readonly("beta", &LossBreakdown::beta)
      .def("mean_lp", &LossBreakdown::mean_lp)
      .def("mean_lq", &LossBreakdown::mean_lq);

  py::class_<ConfidenceScores>(m, "ConfidenceScores")
      .def_readonly("msp", &ConfidenceScores::msp)
      .def_readonly("sm", &ConfidenceScores::sm)
      .def_readonly("entropy_score", &ConfidenceScores::entropy_score);

  m.def("cross_entropy",
        [](const std::vector<double>& p, std::size_t y) {
          return cross_entropy(p, y);
        });
  m.def("loss_p_whitebox",
        [](const std::vector<double>& p1, const std::vector<double>& p0,
           std::size_t y, double q) { return loss_p_whitebox(p1, p0, y, q); });
  m.def("loss_p_blackbox",
        [](const std::vector<double>& p1, std::size_t y, double q) {
          return loss_p_blackbox(p1, y, q);
        });
  m.def("loss_q", &loss_q);
  m.def("total_loss", &total_loss, py::arg("l_p"), py::arg("l_q"), py::arg("beta"));
  m.def("loss_regression",
        [](const std::vector<double>& pred, const std::vector<double>& target,
           double q, double beta) { return loss_regression(pred, target, q, beta); });
  m.def("baseline_scores", [](const std::vector<double>& p) {
    return baseline_scores(p);
  });
  m.def("optimal_q", &optimal_q, py::arg("ell"), py::arg("beta"));
  m.def("variance_estimate", &variance_estimate, py::arg("q"), py::arg("beta"));

  py::enum_<BigMode>(m, "BigMode")
      .value("WhiteBox", BigMode::WhiteBox)
      .value("BlackBox", BigMode::BlackBox);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("lr_init", &TrainConfig::lr_init)
      .def_readwrite("lr_decay_epochs", &TrainConfig::lr_decay_epochs)
      .def_readwrite("lr_decay_factor", &TrainConfig::lr_decay_factor)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("beta_init", &TrainConfig::beta_init)
      .def_readwrite("alpha", &TrainConfig::alpha)
      .def_readwrite("beta_min", &TrainConfig::beta_min)
      .def_readwrite("beta_max", &TrainConfig::beta_max)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("mode", &TrainConfig::mode)
      .def_readwrite("err_threshold", &TrainConfig::err_threshold);

  py::class_<EpochRecord>(m, "EpochRecord")
      .def_readonly("epoch", &EpochRecord::epoch)
      .def_readonly("mean_lp", &EpochRecord::mean_lp)
      .def_readonly("mean_lq", &EpochRecord::mean_lq)
      .def_readonly("beta", &EpochRecord::beta)
      .def_readonly("acc_train", &EpochRecord::acc_train)
      .def_readonly("acc_test", &EpochRecord::acc_test)
      .def_readonly("mean_q", &EpochRecord::mean_q);

  py::class_<StepRecord>(m, "StepRecord")
      .def_readonly("mean_lp", &StepRecord::mean_lp)
      .def_readonly("mean_lq", &StepRecord::mean_lq)
      .def_readonly("beta", &StepRecord::beta);

  py::class_<TrainLog>(m, "TrainLog")
      .def_readonly("epochs", &TrainLog::epochs)
      .def_readonly("steps", &TrainLog::steps);

  m.def("lr_at", &lr_at, py::arg("epoch"), py::arg("cfg"));
  m.def("update_beta", &update_beta, py::arg("beta"), py::arg("mean_lq"),
        py::arg("alpha"), py::arg("beta_min"), py::arg("beta_max"));
  m.def("pretrain_approximator", &pretrain_approximator, py::arg("arch"),
        py::arg("train"), py::arg("test"), py::arg("cfg"));
  m.def("joint_train", &joint_train, py::arg("net"), py::arg("big"),
        py::arg("train"), py::arg("test"), py::arg("cfg"));
  m.def("approximator_accuracy",
        py::overload_cast<const TwoHeadNet&, const Dataset&, double>(
            &approximator_accuracy),
        py::arg("net"), py::arg("data"), py::arg("err_threshold") = 0.0);

  py::enum_<ScoreSource>(m, "ScoreSource")
      .value("PredictorQ", ScoreSource::PredictorQ)
      .value("Msp", ScoreSource::Msp)
      .value("ScoreMargin", ScoreSource::ScoreMargin)
      .value("Entropy", ScoreSource::Entropy);

  py::enum_<Route>(m, "Route")
      .value("Edge", Route::Edge)
      .value("Cloud", Route::Cloud);

  py::class_<RoutingPolicy>(m, "RoutingPolicy")
      .def(py::init<>())
      .def(py::init([](ScoreSource s, double delta) {
             return RoutingPolicy{s, delta};
           }),
           py::arg("source"), py::arg("delta"))
      .def_readwrite("source", &RoutingPolicy::source)
      .def_readwrite("delta", &RoutingPolicy::delta);

  py::class_<CostModel>(m, "CostModel")
      .def(py::init<double, double, double>(), py::arg("c1"), py::arg("c0"),
           py::arg("b"))
      .def_static("with_midpoint_budget", &CostModel::with_midpoint_budget)
      .def_readwrite("c1", &CostModel::c1)
      .def_readwrite("c0", &CostModel::c0)
      .def_readwrite("b", &CostModel::b);

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("delta", &EvalReport::delta)
      .def_readonly("sr", &EvalReport::sr)
      .def_readonly("ar", &EvalReport::ar)
      .def_readonly("overall_accuracy", &EvalReport::overall_accuracy)
      .def_readonly("acc_small", &EvalReport::acc_small)
      .def_readonly("acc_big", &EvalReport::acc_big)
      .def_readonly("acc_i", &EvalReport::acc_i)
      .def_readonly("ad", &EvalReport::ad)
      .def_readonly("cost", &EvalReport::cost)
      .def_readonly("n_samples", &EvalReport::n_samples);

  py::class_<AccuracyTarget> target(m, "AccuracyTarget");
  py::enum_<AccuracyTarget::Kind>(target, "Kind")
      .value("MaxAD", AccuracyTarget::Kind::MaxAD)
      .value("MinAccI", AccuracyTarget::Kind::MinAccI);
  target.def(py::init([](AccuracyTarget::Kind kind, double value) {
               return AccuracyTarget{kind, value};
             }),
             py::arg("kind"), py::arg("value"))
      .def_readwrite("kind", &AccuracyTarget::kind)
      .def_readwrite("value", &AccuracyTarget::value);

  py::class_<ScoreHistogram>(m, "ScoreHistogram")
      .def_readonly("bin_left", &ScoreHistogram::bin_left)
      .def_readonly("correct", &ScoreHistogram::correct)
      .def_readonly("incorrect", &ScoreHistogram::incorrect);

  m.def("route", &route, py::arg("score"), py::arg("delta"));
  m.def("budget_fraction", &budget_fraction);
  m.def("overall_cost", &overall_cost, py::arg("sr"), py::arg("cost"));
  m.def("acc_improvement", &acc_improvement, py::arg("acc_sys"),
        py::arg("acc_small"), py::arg("acc_big"));
  m.def("evaluate", &evaluate, py::arg("net"), py::arg("big"), py::arg("data"),
        py::arg("policy"), py::arg("cost"));
  m.def("sweep_thresholds", &sweep_thresholds, py::arg("net"), py::arg("big"),
        py::arg("data"), py::arg("source"), py::arg("cost"), py::arg("deltas"));
  m.def("find_delta_for_target", &find_delta_for_target, py::arg("net"),
        py::arg("big"), py::arg("data"), py::arg("source"), py::arg("target"),
        py::arg("grid_points") = 1001);
  m.def("find_delta_for_target_regression", &find_delta_for_target_regression,
        py::arg("net"), py::arg("data"), py::arg("err_threshold"),
        py::arg("target"), py::arg("grid_points") = 1001);
  m.def("score_histogram", &score_histogram, py::arg("net"), py::arg("data"),
        py::arg("source"), py::arg("bins"));
  m.def("auroc", &auroc, py::arg("scores_correct"), py::arg("scores_incorrect"));
  m.def("evaluate_regression", &evaluate_regression, py::arg("net"),
        py::arg("data"), py::arg("err_threshold"), py::arg("policy"),
        py::arg("cost"));
  m.def("routing_scores", &routing_scores, py::arg("net"), py::arg("data"),
        py::arg("source"));

  py::register_exception<NoArchitectureFits>(m, "NoArchitectureFits");
  py::register_exception<TargetUnattainable>(m, "TargetUnattainable");
  py::register_exception<ConfigError>(m, "ConfigError");
}
