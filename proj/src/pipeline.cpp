#include "aad/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <future>
#include <stdexcept>

#include <json.hpp>

#include "aad/eval.hpp"
#include "aad/optim.hpp"

namespace aad {

namespace {

constexpr std::uint64_t kStep1Stream = 0x01;
constexpr std::uint64_t kStep2SourceStream = 0xA5;
constexpr std::uint64_t kStep2TargetStream = 0xB6;

std::vector<std::vector<int>> gather_tokens(const std::vector<Example>& xs,
                                            const std::vector<std::size_t>& idx) {
  std::vector<std::vector<int>> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(xs[i].tokens);
  return out;
}

std::vector<int> gather_labels(const std::vector<Example>& xs,
                               const std::vector<std::size_t>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) {
    if (!xs[i].label)
      throw std::runtime_error("internal: label requested from an unlabeled "
                               "example");
    out.push_back(*xs[i].label);
  }
  return out;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v))
    throw std::runtime_error(std::string("training diverged: non-finite ") +
                             what);
}

}  // namespace

void AdaptConfig::validate() const {
  if (step1.epochs < 1 || step2.epochs < 1)
    throw std::invalid_argument("config: epochs must be >= 1");
  if (step1.lr <= 0 || step2.lr <= 0)
    throw std::invalid_argument("config: learning rates must be > 0");
  if (step1.batch < 1 || step2.batch < 1)
    throw std::invalid_argument("config: batch size must be >= 1");
  if (!(temperature > 0))
    throw std::invalid_argument("config: temperature must be > 0");
  if (kd_weight < 0)
    throw std::invalid_argument("config: kd_weight must be >= 0");
  if (d_steps_per_g_step < 1)
    throw std::invalid_argument("config: d_steps_per_g_step must be >= 1");
  if (!method_known(method))
    throw std::invalid_argument("config: unknown method '" + method + "'");
}

bool method_known(const std::string& method) {
  static const char* known[] = {"baseline", "aad",  "aad-supervised",
                                "ddc",      "dann", "coral"};
  return std::find(std::begin(known), std::end(known), method) !=
         std::end(known);
}

double step1_finetune(ModelBundle& bundle, const DomainPairDataset& ds,
                      const AdaptConfig& cfg, RunResult* trace) {
  cfg.validate();
  ParamList trainable =
      encoder_params(bundle.source_encoder, "source_encoder");
  for (Param& p : classifier_params(bundle.classifier)) trainable.push_back(p);
  Adam opt(cfg.step1.lr);
  for (std::size_t epoch = 0; epoch < cfg.step1.epochs; ++epoch) {
    auto batches = make_batches(ds.source_train.size(), cfg.step1.batch,
                                cfg.seed ^ kStep1Stream, epoch);
    for (const auto& idx : batches) {
      auto tokens = gather_tokens(ds.source_train, idx);
      auto labels = gather_labels(ds.source_train, idx);
      Tensor rep = encode(bundle.source_encoder, tokens);
      LossValue loss = source_ce(classify_logits(bundle.classifier, rep), labels);
      check_finite(loss.value(), "step-1 loss");
      if (trace) trace->step1_loss.push_back(loss.value());
      zero_grads(trainable);
      backward(loss.tensor);
      opt.step(trainable);
    }
  }
  // Hand off to step 2: copy the fine-tuned encoder, freeze source side.
  bundle.target_encoder = copy_params(bundle.source_encoder);
  set_requires_grad(encoder_params(bundle.source_encoder, "source_encoder"),
                    false);
  set_requires_grad(classifier_params(bundle.classifier), false);
  bundle.source_encoder_frozen = true;
  bundle.classifier_frozen = true;
  return step3_evaluate(bundle, ds.source_dev, /*use_source_encoder=*/true,
                        cfg.step1.batch);
}

void step2_adapt(ModelBundle& bundle, const DomainPairDataset& ds,
                 const AdaptConfig& cfg, RunResult* trace) {
  cfg.validate();
  if (!bundle.source_encoder_frozen || !bundle.classifier_frozen)
    throw std::invalid_argument("step2_adapt: step 1 must run first");
  bool supervised = cfg.method == "aad-supervised";
  ParamList d_params = discriminator_params(bundle.discriminator);
  ParamList g_params = encoder_params(bundle.target_encoder, "target_encoder");
  Adam d_opt(cfg.step2.lr);
  Adam g_opt(cfg.step2.lr);
  Temperature t(cfg.temperature);

  for (std::size_t epoch = 0; epoch < cfg.step2.epochs; ++epoch) {
    auto src_batches = make_batches(ds.source_train.size(), cfg.step2.batch,
                                    cfg.seed ^ kStep2SourceStream, epoch);
    auto tgt_batches = make_batches(ds.target_train.size(), cfg.step2.batch,
                                    cfg.seed ^ kStep2TargetStream, epoch);
    std::size_t steps = std::min(src_batches.size(), tgt_batches.size());
    for (std::size_t k = 0; k < steps; ++k) {
      auto src_tokens = gather_tokens(ds.source_train, src_batches[k]);
      auto tgt_tokens = gather_tokens(ds.target_train, tgt_batches[k]);

      // (a) discriminator step on detached representations
      for (std::size_t ds_step = 0; ds_step < cfg.d_steps_per_g_step;
           ++ds_step) {
        Tensor src_rep =
            encode(bundle.source_encoder, src_tokens).clone_detached();
        Tensor tgt_rep =
            encode(bundle.target_encoder, tgt_tokens).clone_detached();
        LossValue dl = dis_loss(discriminate(bundle.discriminator, src_rep),
                                discriminate(bundle.discriminator, tgt_rep));
        check_finite(dl.value(), "discriminator loss");
        if (trace) trace->dis_trace.push_back(dl.value());
        zero_grads(d_params);
        backward(dl.tensor);
        clip_grad_value(d_params, cfg.clip_value);
        d_opt.step(d_params);
        if (cfg.weight_clip) clip_weight_value(d_params, cfg.clip_value);
        if (trace) ++trace->d_updates;
      }

      // (b) target-encoder step on gen + distillation (or supervised CE)
      Tensor tgt_rep = encode(bundle.target_encoder, tgt_tokens);
      LossValue gen = gen_loss(discriminate(bundle.discriminator, tgt_rep));
      Tensor student_logits = classify_logits(
          bundle.classifier, encode(bundle.target_encoder, src_tokens));
      LossValue total;
      double second_term;
      if (supervised) {
        auto labels = gather_labels(ds.source_train, src_batches[k]);
        total = target_objective_supervised(gen, student_logits, labels);
        second_term = total.value() - gen.value();
      } else {
        Tensor teacher_logits = classify_logits(
            bundle.classifier, encode(bundle.source_encoder, src_tokens));
        LossValue kd = kd_loss(teacher_logits, student_logits, t);
        total = target_objective(gen, kd, cfg.kd_weight);
        second_term = kd.value();
      }
      check_finite(total.value(), "target-encoder loss");
      if (trace) {
        trace->gen_trace.push_back(gen.value());
        trace->kd_trace.push_back(second_term);
      }
      zero_grads(g_params);
      zero_grads(d_params);  // gen loss also deposits grads into D
      backward(total.tensor);
      clip_grad_norm(g_params, cfg.clip_norm);
      g_opt.step(g_params);
      if (trace) ++trace->g_updates;
    }
  }
}

double step3_evaluate(const ModelBundle& bundle,
                      const std::vector<Example>& labeled,
                      bool use_source_encoder, std::size_t batch) {
  if (labeled.empty())
    throw std::invalid_argument("step3_evaluate: empty evaluation set");
  const EncoderParams& enc =
      use_source_encoder ? bundle.source_encoder : bundle.target_encoder;
  std::vector<int> preds, labels;
  preds.reserve(labeled.size());
  for (std::size_t start = 0; start < labeled.size(); start += batch) {
    std::size_t end = std::min(labeled.size(), start + batch);
    std::vector<std::vector<int>> tokens;
    for (std::size_t i = start; i < end; ++i) {
      if (!labeled[i].label)
        throw std::invalid_argument("step3_evaluate: unlabeled example");
      tokens.push_back(labeled[i].tokens);
      labels.push_back(*labeled[i].label);
    }
    Tensor logits = classify_logits(bundle.classifier, encode(enc, tokens));
    std::size_t K = logits.shape()[1];
    const auto& v = logits.values();
    for (std::size_t r = 0; r < tokens.size(); ++r) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < K; ++k)
        if (v[r * K + k] > v[r * K + best]) best = k;  // tie -> lower index
      preds.push_back(static_cast<int>(best));
    }
  }
  return accuracy(preds, labels);
}

void run_alignment_baseline(ModelBundle& bundle, const DomainPairDataset& ds,
                            const AdaptConfig& cfg, RunResult* trace) {
  cfg.validate();
  ParamList trainable =
      encoder_params(bundle.source_encoder, "source_encoder");
  for (Param& p : classifier_params(bundle.classifier)) trainable.push_back(p);
  if (cfg.method == "dann")
    for (Param& p : discriminator_params(bundle.discriminator))
      trainable.push_back(p);
  Adam opt(cfg.step1.lr);
  for (std::size_t epoch = 0; epoch < cfg.step1.epochs; ++epoch) {
    auto src_batches = make_batches(ds.source_train.size(), cfg.step1.batch,
                                    cfg.seed ^ kStep1Stream, epoch);
    auto tgt_batches = make_batches(ds.target_train.size(), cfg.step1.batch,
                                    cfg.seed ^ kStep2TargetStream, epoch);
    std::size_t steps = std::min(src_batches.size(), tgt_batches.size());
    for (std::size_t k = 0; k < steps; ++k) {
      auto src_tokens = gather_tokens(ds.source_train, src_batches[k]);
      auto labels = gather_labels(ds.source_train, src_batches[k]);
      Tensor src_rep = encode(bundle.source_encoder, src_tokens);
      LossValue ce =
          source_ce(classify_logits(bundle.classifier, src_rep), labels);
      LossValue total = ce;
      if (cfg.align_weight != 0.0) {
        auto tgt_tokens = gather_tokens(ds.target_train, tgt_batches[k]);
        Tensor tgt_rep = encode(bundle.source_encoder, tgt_tokens);
        LossValue align;
        if (cfg.method == "ddc") {
          align = mmd_gaussian(src_rep, tgt_rep,
                               {mmd_median_bandwidth(src_rep, tgt_rep)});
        } else if (cfg.method == "coral") {
          align = coral_loss(src_rep, tgt_rep);
        } else if (cfg.method == "dann") {
          Tensor src_rev = gradient_reversal(src_rep, cfg.dann_lambda);
          Tensor tgt_rev = gradient_reversal(tgt_rep, cfg.dann_lambda);
          LossValue dom = {
              add(domain_bce(discriminate(bundle.discriminator, src_rev), 1)
                      .tensor,
                  domain_bce(discriminate(bundle.discriminator, tgt_rev), 0)
                      .tensor)};
          align = dom;
        } else {
          throw std::invalid_argument("run_alignment_baseline: method '" +
                                      cfg.method + "' has no alignment loss");
        }
        if (trace) trace->kd_trace.push_back(align.value());
        total = dann_objective(ce, {scale(align.tensor, cfg.align_weight)});
      }
      check_finite(total.value(), "alignment-baseline loss");
      if (trace) trace->step1_loss.push_back(ce.value());
      zero_grads(trainable);
      backward(total.tensor);
      opt.step(trainable);
    }
  }
  // shared-encoder inference: keep E_t identical to E_s.
  bundle.target_encoder = copy_params(bundle.source_encoder);
}

RunResult run_method(const std::string& method, const DomainPairDataset& ds,
                     AdaptConfig cfg, const std::string& pair_id) {
  cfg.method = method;
  RunResult r;
  r.method = method;
  r.pair = pair_id;
  r.seed = cfg.seed;
  try {
    cfg.validate();
    ModelConfig mc = cfg.model;
    mc.vocab_size = ds.vocab_size ? ds.vocab_size : mc.vocab_size;
    ModelBundle bundle = init_params(mc, cfg.seed);
    if (method == "baseline" || method == "aad" ||
        method == "aad-supervised") {
      r.source_dev_before = step1_finetune(bundle, ds, cfg, &r);
      r.source_dev_after = r.source_dev_before;
      if (method != "baseline") {
        step2_adapt(bundle, ds, cfg, &r);
        r.source_dev_after =
            step3_evaluate(bundle, ds.source_dev, /*use_source_encoder=*/false);
      }
      r.target_accuracy = step3_evaluate(
          bundle, ds.target_eval, /*use_source_encoder=*/method == "baseline");
    } else {
      run_alignment_baseline(bundle, ds, cfg, &r);
      r.source_dev_before =
          step3_evaluate(bundle, ds.source_dev, /*use_source_encoder=*/true);
      r.source_dev_after = r.source_dev_before;
      r.target_accuracy =
          step3_evaluate(bundle, ds.target_eval, /*use_source_encoder=*/true);
    }
    if (!cfg.checkpoint_dir.empty()) {
      std::string id = pair_id + "_" + method + "_" + std::to_string(cfg.seed);
      for (char& c : id)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' &&
            c != '-')
          c = '_';
      save_checkpoint(bundle, cfg.checkpoint_dir + "/" + id + ".json");
    }
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

std::vector<RunResult> run_experiment(
    const std::map<std::string, DomainPairDataset>& pairs,
    const std::vector<std::string>& methods,
    const std::vector<std::uint64_t>& seeds, const AdaptConfig& base_cfg,
    std::size_t jobs) {
  if (pairs.empty() || methods.empty() || seeds.empty())
    throw std::invalid_argument("run_experiment: need >= 1 pair, method, seed");
  struct Job {
    const std::string* pair;
    const DomainPairDataset* ds;
    const std::string* method;
    std::uint64_t seed;
  };
  std::vector<Job> todo;
  for (const auto& [pair_id, ds] : pairs)
    for (const std::string& m : methods)
      for (std::uint64_t s : seeds) todo.push_back({&pair_id, &ds, &m, s});

  std::vector<RunResult> results(todo.size());
  auto worker = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < todo.size(); i += stride) {
      AdaptConfig cfg = base_cfg;
      cfg.seed = todo[i].seed;
      results[i] = run_method(*todo[i].method, *todo[i].ds, cfg, *todo[i].pair);
    }
  };
  if (jobs <= 1) {
    worker(0, 1);
  } else {
    std::vector<std::future<void>> futs;
    for (std::size_t t = 0; t < jobs; ++t)
      futs.push_back(std::async(std::launch::async, worker, t, jobs));
    for (auto& f : futs) f.get();
  }
  return results;
}

double max_param_delta(const ParamList& a, const ParamList& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("max_param_delta: size mismatch");
  double mx = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name)
      throw std::invalid_argument("max_param_delta: name mismatch " +
                                  a[i].name + " vs " + b[i].name);
    const auto& va = a[i].tensor.values();
    const auto& vb = b[i].tensor.values();
    if (va.size() != vb.size())
      throw std::invalid_argument("max_param_delta: shape mismatch for " +
                                  a[i].name);
    for (std::size_t j = 0; j < va.size(); ++j)
      mx = std::max(mx, std::fabs(va[j] - vb[j]));
  }
  return mx;
}

ParamList snapshot_params(const ParamList& params) {
  ParamList out;
  out.reserve(params.size());
  for (const Param& p : params)
    out.push_back({p.name, p.tensor.clone_detached()});
  return out;
}

std::string run_result_json(const RunResult& r) {
  nlohmann::json j;
  j["method"] = r.method;
  j["pair"] = r.pair;
  j["seed"] = r.seed;
  j["ok"] = r.ok;
  if (!r.ok) j["error"] = r.error;
  j["target_accuracy"] = r.target_accuracy;
  j["source_dev_before"] = r.source_dev_before;
  j["source_dev_after"] = r.source_dev_after;
  j["step1_loss"] = r.step1_loss;
  j["dis_trace"] = r.dis_trace;
  j["gen_trace"] = r.gen_trace;
  j["kd_trace"] = r.kd_trace;
  j["d_updates"] = r.d_updates;
  j["g_updates"] = r.g_updates;
  return j.dump(2);
}

}  // namespace aad
