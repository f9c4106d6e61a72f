#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "aad/data.hpp"
#include "aad/losses.hpp"
#include "aad/models.hpp"

namespace aad {

struct StepConfig {
  std::size_t epochs = 3;
  double lr = 5e-5;
  std::size_t batch = 64;
};

struct AdaptConfig {
  StepConfig step1{3, 5e-5, 64};
  StepConfig step2{3, 1e-5, 64};
  double temperature = 20.0;
  double kd_weight = 1.0;  // 0 reproduces pure ADDA
  double clip_norm = 1.0;   // target-encoder gradient norm clip
  double clip_value = 0.01;  // discriminator gradient value clamp
  bool weight_clip = false;  // WGAN-style weight clamping instead (off)
  std::size_t d_steps_per_g_step = 1;
  double align_weight = 1.0;  // ddc/dann/coral alignment-loss weight
  double dann_lambda = 1.0;
  std::uint64_t seed = 0;
  std::string method = "aad";
  std::string checkpoint_dir;  // empty disables checkpoint writing
  ModelConfig model;

  void validate() const;
};

struct RunResult {
  std::string method;
  std::string pair;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double target_accuracy = 0.0;
  double source_dev_before = 0.0;  // after step 1, via E_s
  double source_dev_after = 0.0;   // after adaptation, via E_t
  std::vector<double> step1_loss;  // per-batch trace
  std::vector<double> dis_trace;
  std::vector<double> gen_trace;
  std::vector<double> kd_trace;
  std::size_t d_updates = 0;
  std::size_t g_updates = 0;
};

// Known methods: baseline, aad, aad-supervised, ddc, dann, coral.
bool method_known(const std::string& method);

// Trains E_s and C on source_train; copies the encoder into E_t and freezes
// E_s and C. Returns source-dev accuracy.
double step1_finetune(ModelBundle& bundle, const DomainPairDataset& ds,
                      const AdaptConfig& cfg, RunResult* trace = nullptr);

// Alternating discriminator / target-encoder updates. With cfg.method ==
// "aad-supervised" the second loss term is source CE through E_t instead of
// the distillation term.
void step2_adapt(ModelBundle& bundle, const DomainPairDataset& ds,
                 const AdaptConfig& cfg, RunResult* trace = nullptr);

// argmax C(E(x)) accuracy over labeled examples; ties go to the lower class.
double step3_evaluate(const ModelBundle& bundle,
                      const std::vector<Example>& labeled,
                      bool use_source_encoder = false,
                      std::size_t batch = 64);

// Single-phase training: source CE plus the method's alignment loss on the
// shared encoder (ddc -> MMD, dann -> reversed domain CE, coral -> CORAL).
void run_alignment_baseline(ModelBundle& bundle, const DomainPairDataset& ds,
                            const AdaptConfig& cfg, RunResult* trace = nullptr);

RunResult run_method(const std::string& method, const DomainPairDataset& ds,
                     AdaptConfig cfg, const std::string& pair_id);

// Full (pair x method x seed) cross product; failed runs are recorded with
// ok = false, never dropped. jobs > 1 dispatches runs across threads.
std::vector<RunResult> run_experiment(
    const std::map<std::string, DomainPairDataset>& pairs,
    const std::vector<std::string>& methods,
    const std::vector<std::uint64_t>& seeds, const AdaptConfig& base_cfg,
    std::size_t jobs = 1);

// L-infinity distance between two parameter lists with matching names.
double max_param_delta(const ParamList& a, const ParamList& b);

ParamList snapshot_params(const ParamList& params);  // detached deep copies

std::string run_result_json(const RunResult& r);

}  // namespace aad
