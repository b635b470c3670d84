// Acceptance run: one PASS/FAIL line per criterion.
//
//   w2a_acceptance            all criteria
//   w2a_acceptance 3 4        a subset
//
// Criteria that need trained components share one pipeline per seed, so
// running several of them together costs little more than the slowest one.
// Progress goes to stderr; the verdict lines go to stdout. Exit status is
// nonzero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "align_oracle.h"
#include "test_util.h"
#include "w2a/adapters/adapters.h"
#include "w2a/align/contrastive.h"
#include "w2a/numerics/ops.h"
#include "w2a/pipeline/config.h"
#include "w2a/pipeline/demo_io.h"
#include "w2a/pipeline/metrics.h"
#include "w2a/pipeline/stages.h"
#include "w2a/policy/base_policy.h"
#include "w2a/policy/idm.h"
#include "w2a/policy/residual.h"
#include "w2a/skillseg/skillseg.h"
#include "w2a/worldmodel/engine.h"

namespace w2a::acceptance {
namespace {

namespace fs = std::filesystem;
using align::Variant;
using chunkworld::Demonstration;
using chunkworld::EpisodeSpec;
using chunkworld::Instruction;
using chunkworld::TaskKind;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kSeeds[] = {0, 1, 2};
constexpr int kEvalEpisodes = 500;
constexpr std::size_t kStage1Demos = 200;
constexpr std::size_t kProbeDemos = 100;
// Degraded base: the first 50 demos with 0.01 world-unit label noise.
constexpr std::size_t kDegradedDemos = 50;
constexpr double kDegradedNoise = 0.01;
// latent_noise level used for the robustness comparison.
constexpr double kArtifactSigma = 0.5;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

void Progress(const std::string& line) {
  std::fprintf(stderr, "  .. %s\n", line.c_str());
  std::fflush(stderr);
}

std::string Fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string List(const std::vector<double>& v, int digits = 3) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + Fixed(v[i], digits);
  return s + "]";
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Per-seed pipeline, built lazily and shared between criteria.

struct Stage2Run {
  policy::Stage2Result result;
  double seconds = 0.0;
};

class SeedPipeline {
 public:
  explicit SeedPipeline(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  const EpisodeSpec& spec() const { return spec_; }
  const worldmodel::ImaginationEngine& clean_engine() const { return clean_engine_; }

  const std::vector<Demonstration>& Demos() {
    if (!demos_) {
      const auto records = pipeline::GenerateDemos(kStage1Demos, std::nullopt, 0.0, seed_, spec_);
      demos_ = pipeline::LoadForTraining(records, spec_.chunk_size);
    }
    return *demos_;
  }

  // Disjoint from every training set: drawn from a different generator seed.
  const std::vector<Demonstration>& ProbeDemos() {
    if (!probe_demos_) {
      const auto records = pipeline::GenerateDemos(kProbeDemos, std::nullopt, 0.0, 1000 + seed_, spec_);
      probe_demos_ = pipeline::LoadForTraining(records, spec_.chunk_size);
    }
    return *probe_demos_;
  }

  const std::vector<adapters::Stage1Example>& Examples() {
    if (!examples_) examples_ = pipeline::Stage1Examples(Demos(), clean_engine_);
    return *examples_;
  }

  const adapters::Stage1Result& Stage1() {
    if (!stage1_) {
      adapters::Stage1Config cfg;
      cfg.seed = seed_;
      const auto start = Clock::now();
      stage1_ = adapters::Stage1Train(Examples(), cfg);
      stage1_seconds_ = Seconds(start);
      Progress("seed " + std::to_string(seed_) + ": stage 1 in " + Fixed(stage1_seconds_, 1) + " s");
    }
    return *stage1_;
  }
  double stage1_seconds() const { return stage1_seconds_; }

  const adapters::AdapterBundle& Bundle() { return Stage1().bundle; }

  const policy::BasePolicy& Base() {
    if (!base_) {
      policy::BcConfig cfg;
      cfg.seed = seed_;
      cfg.demo_count = kDegradedDemos;
      cfg.label_noise = kDegradedNoise;
      const auto start = Clock::now();
      base_ = policy::BcTrain(Demos(), cfg, spec_);
      Progress("seed " + std::to_string(seed_) + ": degraded base in " + Fixed(Seconds(start), 1) + " s");
    }
    return *base_;
  }

  const Stage2Run& Stage2(Variant variant, bool artifacts) {
    const auto key = std::make_pair(static_cast<int>(variant), artifacts);
    auto it = stage2_.find(key);
    if (it != stage2_.end()) return it->second;
    policy::Stage2Config cfg;
    cfg.seed = seed_;
    cfg.contrastive.variant = variant;
    Rng rng(seed_);
    const auto fresh = policy::ResidualPolicy::Initialize(cfg.residual, rng);
    const auto& base = Base();
    const auto& bundle = Bundle();
    const auto start = Clock::now();
    Stage2Run run{policy::Stage2Train(base, fresh, bundle, artifacts ? ArtifactEngine() : clean_engine_, cfg),
                  0.0};
    run.seconds = Seconds(start);
    Progress("seed " + std::to_string(seed_) + ": stage 2 " + std::string(align::VariantName(variant)) +
             (artifacts ? " with artifacts" : "") + " in " + Fixed(run.seconds, 1) + " s, final pos_sim " +
             Fixed(run.result.log.back().pos_sim));
    return stage2_.emplace(key, std::move(run)).first->second;
  }

  const worldmodel::ImaginationEngine& ArtifactEngine() {
    if (!artifact_engine_) artifact_engine_.emplace(ArtifactConfig(), spec_);
    return *artifact_engine_;
  }

  static worldmodel::ArtifactConfig ArtifactConfig() {
    worldmodel::ArtifactConfig a;
    a.mode = worldmodel::ArtifactMode::kLatentNoise;
    a.noise_sigma = kArtifactSigma;
    return a;
  }

  const std::vector<Instruction>& EvalSet() {
    if (!eval_set_) eval_set_ = policy::EvalInstructions(kEvalEpisodes, 5000 + seed_);
    return *eval_set_;
  }

  // Success rate over the seed's 500 evaluation episodes, memoized by name.
  double Success(const std::string& name, const std::function<policy::ChunkFn()>& make) {
    auto it = success_.find(name);
    if (it != success_.end()) return it->second;
    const auto start = Clock::now();
    const double rate = policy::Evaluate(make(), EvalSet(), spec_).rate();
    Progress("seed " + std::to_string(seed_) + ": eval " + name + " = " + Fixed(rate, 3) + " (" +
             Fixed(Seconds(start), 1) + " s)");
    return success_.emplace(name, rate).first->second;
  }

  double BaseSuccess() {
    return Success("base", [&] { return policy::BaseChunkFn(Base(), spec_); });
  }

  double RefinedSuccess(Variant variant, bool artifacts) {
    const auto& run = Stage2(variant, artifacts);
    return Success("refined " + std::string(align::VariantName(variant)) + (artifacts ? " artifacts" : ""),
                   [&] { return policy::RefinedChunkFn(Base(), run.result.residual, Bundle(), spec_); });
  }

  const policy::IdmBaselineReport& IdmBaseline() {
    if (!idm_report_) {
      policy::IdmConfig icfg;
      icfg.seed = seed_;
      const auto start = Clock::now();
      idm_ = policy::IdmTrain(Demos(), clean_engine_, icfg);
      policy::IdmBaselineConfig bcfg;
      bcfg.seed = seed_;
      idm_report_ = policy::IdmBaseline(*idm_, Base(), clean_engine_, ArtifactConfig(), bcfg);
      Progress("seed " + std::to_string(seed_) + ": idm baseline in " + Fixed(Seconds(start), 1) +
               " s, label mse ratio " + Fixed(idm_report_->mse_ratio));
    }
    return *idm_report_;
  }

 private:
  std::uint64_t seed_;
  EpisodeSpec spec_;
  worldmodel::ImaginationEngine clean_engine_{{}, spec_};
  std::optional<worldmodel::ImaginationEngine> artifact_engine_;
  std::optional<std::vector<Demonstration>> demos_, probe_demos_;
  std::optional<std::vector<adapters::Stage1Example>> examples_;
  std::optional<adapters::Stage1Result> stage1_;
  double stage1_seconds_ = 0.0;
  std::optional<policy::BasePolicy> base_;
  std::map<std::pair<int, bool>, Stage2Run> stage2_;
  std::optional<std::vector<Instruction>> eval_set_;
  std::map<std::string, double> success_;
  std::optional<policy::IdmModel> idm_;
  std::optional<policy::IdmBaselineReport> idm_report_;
};

std::vector<std::unique_ptr<SeedPipeline>>& Pipelines() {
  static std::vector<std::unique_ptr<SeedPipeline>> p = [] {
    std::vector<std::unique_ptr<SeedPipeline>> v;
    for (std::uint64_t s : kSeeds) v.push_back(std::make_unique<SeedPipeline>(s));
    return v;
  }();
  return p;
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness.

Outcome GradientCorrectness() {
  const auto start = Clock::now();
  const EpisodeSpec spec;
  double worst = 0.0;
  std::string worst_name;
  std::map<std::string, double> per_loss;
  auto record = [&](const std::string& loss, const testing::GradCheckResult& r) {
    per_loss[loss] = std::max(per_loss[loss], r.max_rel_error);
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_name = loss + " " + r.worst;
    }
  };

  for (std::uint64_t draw = 0; draw < 3; ++draw) {
    Rng rng(100 + draw);
    // L_recon and the Stage-1 total through all three adapters.
    const auto bundle = adapters::AdapterBundle::Initialize({}, rng);
    const worldmodel::ImaginationEngine engine;
    std::vector<worldmodel::VideoLatentChunk> grids;
    std::vector<chunkworld::ActionVec> actions;
    for (int i = 0; i < 2; ++i) {
      const Instruction ins = chunkworld::SampleInstruction(chunkworld::kAllTasks[(i + draw) % 4], rng);
      const Demonstration d = chunkworld::ExpertRollout(ins, spec, rng);
      const auto video = engine.EncodeTrajectory(d.states);
      grids.insert(grids.end(), video.begin(), video.begin() + 2);
      actions.insert(actions.end(), d.actions.begin(), d.actions.begin() + 2 * spec.chunk_size);
    }
    const Tensor rows = adapters::GridsToRows(grids, bundle.config());
    const Tensor chunks = adapters::ActionsToChunks(actions, spec.chunk_size);
    record("L_recon", testing::CheckGradients(
                          bundle.params(),
                          [&](Graph& g, const ParameterRecord& p) {
                            return adapters::BuildStage1Loss(g, {bundle.config(), p, false}, rows, chunks, 2, {})
                                .recon;
                          },
                          rng));
    record("L_stage1", testing::CheckGradients(
                           bundle.params(),
                           [&](Graph& g, const ParameterRecord& p) {
                             return adapters::BuildStage1Loss(g, {bundle.config(), p, false}, rows, chunks, 2, {})
                                 .total;
                           },
                           rng));

    // The four contrastive variants on free latents.
    for (Variant variant : {Variant::kBiInfoNceChunk, Variant::kUniInfoNceChunk, Variant::kMarginalChunk,
                            Variant::kBiInfoNceGlobal}) {
      ParameterRecord p;
      p.Set("v", testing::RandomTensor({4 * 3, 8}, rng));
      p.Set("a", testing::RandomTensor({4 * 3, 8}, rng));
      align::ContrastiveConfig cfg;
      cfg.variant = variant;
      record(std::string(align::VariantName(variant)),
             testing::CheckGradients(
                 p,
                 [&](Graph& g, const ParameterRecord& q) {
                   return align::ContrastiveLoss(g.Param(q, "v"), g.Param(q, "a"), 4, cfg);
                 },
                 rng, 200));
    }

    // BC regression.
    policy::BasePolicy base = policy::BasePolicy::Initialize(rng);
    const Tensor inputs = testing::RandomTensor({6, policy::kPolicyInput}, rng);
    const Tensor targets = testing::RandomTensor({6, base.chunk_width()}, rng, 0.5);
    record("L_bc", testing::CheckGradients(
                       base.net,
                       [&](Graph& g, const ParameterRecord& p) {
                         return ops::MeanSquaredError(policy::BaseForward(g, {p, false}, g.Constant(inputs)),
                                                      g.Constant(targets));
                       },
                       rng));

    // IDM regression at a reduced hidden width.
    {
      const std::size_t in = 2 * worldmodel::kLatentChannels * worldmodel::kLatentHeight * worldmodel::kLatentWidth;
      policy::IdmModel model;
      const std::size_t sizes[] = {in, 16, 16, base.chunk_width()};
      for (int k = 0; k < 3; ++k) {
        model.net.Set("idm." + std::to_string(k) + ".w", GlorotInit(sizes[k], sizes[k + 1], rng));
        model.net.Set("idm." + std::to_string(k) + ".b", testing::RandomTensor({sizes[k + 1]}, rng, 0.1));
      }
      const Tensor x = testing::RandomTensor({4, in}, rng);
      const Tensor y = testing::RandomTensor({4, base.chunk_width()}, rng, 0.5);
      record("L_idm", testing::CheckGradients(
                          model.net,
                          [&](Graph& g, const ParameterRecord& p) {
                            policy::IdmModel m;
                            m.net = p;
                            return ops::MeanSquaredError(policy::IdmForward(g, m, g.Constant(x)), g.Constant(y));
                          },
                          rng));
    }

    // Stage-2 loss on a frozen rollout batch, residual head perturbed away
    // from zero.
    {
      base.frozen = true;
      auto frozen_bundle = bundle;
      frozen_bundle.Freeze();
      auto res = policy::ResidualPolicy::Initialize({}, rng);
      for (const char* name : {"res.head.1.w", "res.head.1.b"}) {
        Tensor& t = res.params.GetMutable(name);
        t = testing::RandomTensor(t.shape(), rng, 0.3);
      }
      const std::vector<Instruction> ins{chunkworld::SampleInstruction(TaskKind::kPick, rng),
                                         chunkworld::SampleInstruction(TaskKind::kPickAndPlace, rng)};
      const Tensor video = testing::RandomTensor({2 * static_cast<std::size_t>(spec.chunk_count), align::kLatentDim}, rng);
      policy::Stage2Config cfg;
      cfg.parallel_rollouts = 2;
      Graph g;
      const auto visited = policy::BuildStage2Loss(g, base, res, frozen_bundle, ins, video, cfg, spec);
      record("L_stage2",
             testing::CheckGradients(
                 res.params,
                 [&](Graph& fg, const ParameterRecord& p) {
                   return policy::Stage2LossOnStates(fg, base, {res.config, p}, frozen_bundle, ins, visited, video,
                                                     cfg, spec);
                 },
                 rng, 4));
    }
  }
  const double secs = Seconds(start);
  std::string detail = "max rel err " + std::to_string(worst) + " (";
  bool first = true;
  for (const auto& [name, err] : per_loss) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s%s %.1e", first ? "" : ", ", name.c_str(), err);
    detail += buf;
    first = false;
  }
  detail += "), " + Fixed(secs, 1) + " s";
  if (worst >= 1e-4) detail += "; worst " + worst_name;
  return {worst < 1e-4 && secs < 120.0, detail};
}

// ---------------------------------------------------------------------------
// 2. Loss oracle equivalence.

Outcome LossOracle() {
  double worst = 0.0;
  for (Variant variant : {Variant::kBiInfoNceChunk, Variant::kUniInfoNceChunk, Variant::kMarginalChunk,
                          Variant::kBiInfoNceGlobal}) {
    for (std::size_t b : {1, 2, 4, 8}) {
      for (std::uint64_t draw = 0; draw < 5; ++draw) {
        Rng rng(1000 * b + 10 * static_cast<std::uint64_t>(variant) + draw);
        std::vector<Tensor> v, a;
        for (std::size_t i = 0; i < b; ++i) {
          v.push_back(testing::RandomTensor({12, align::kLatentDim}, rng));
          a.push_back(testing::RandomTensor({12, align::kLatentDim}, rng));
        }
        align::ContrastiveConfig cfg;
        cfg.variant = variant;
        worst = std::max(worst, std::abs(align::ContrastiveLossValue(v, a, cfg) - align::oracle::OracleLoss(v, a, cfg)));
      }
    }
  }
  Rng rng(3);
  const std::vector<Tensor> single_v{testing::RandomTensor({12, align::kLatentDim}, rng)};
  const std::vector<Tensor> single_a{testing::RandomTensor({12, align::kLatentDim}, rng)};
  const double singleton = align::ContrastiveLossValue(single_v, single_a, {});
  const std::vector<Tensor> e{Tensor::Matrix({{1, 0}}), Tensor::Matrix({{0, 1}})};
  const double closed = align::ContrastiveLossValue(e, e, {});
  const double closed_err = std::abs(closed - 2.0 * std::log1p(std::exp(-10.0)));
  char buf[200];
  std::snprintf(buf, sizeof(buf), "max |loss - oracle| %.2e over 4 variants x B in {1,2,4,8}; B=1 loss %g; "
                "2x2 closed-form error %.2e", worst, singleton + 0.0, closed_err);
  return {worst < 1e-10 && singleton == 0.0 && closed_err < 1e-9, buf};
}

// ---------------------------------------------------------------------------
// 3. Stage-1 held-out reconstruction and alignment.

Outcome Stage1Alignment() {
  std::vector<double> recon, sim, secs;
  int ok = 0;
  for (auto& p : Pipelines()) {
    const auto& r = p->Stage1();
    const auto eval = adapters::EvaluateStage1(r.bundle, p->Examples(), r.holdout_indices);
    recon.push_back(eval.recon_mse);
    sim.push_back(eval.pos_sim);
    secs.push_back(p->stage1_seconds());
    ok += eval.recon_mse < 1e-2 && eval.pos_sim > 0.9 && p->stage1_seconds() < 300.0;
  }
  return {ok == 3, "held-out recon mse " + List(recon, 5) + ", pos_sim " + List(sim) + ", seconds " +
                       List(secs, 0) + "; " + std::to_string(ok) + "/3 seeds"};
}

// ---------------------------------------------------------------------------
// 4. Stage-2 similarity and success over the degraded base.

// Mean pos_sim of the last 200 logged iterations.
double FinalSimilarity(const policy::Stage2Result& r) {
  const std::size_t n = std::min<std::size_t>(200, r.log.size());
  double s = 0.0;
  for (std::size_t i = r.log.size() - n; i < r.log.size(); ++i) s += r.log[i].pos_sim;
  return s / static_cast<double>(n);
}

Outcome Stage2Improvement() {
  std::vector<double> sim, base, refined, secs;
  int ok = 0;
  for (auto& p : Pipelines()) {
    const auto& run = p->Stage2(Variant::kBiInfoNceChunk, false);
    sim.push_back(FinalSimilarity(run.result));
    secs.push_back(run.seconds);
    base.push_back(p->BaseSuccess());
    refined.push_back(p->RefinedSuccess(Variant::kBiInfoNceChunk, false));
    ok += sim.back() > 0.9 && refined.back() - base.back() >= 0.03 && run.seconds < 600.0;
  }
  return {ok >= 2, "final pos_sim " + List(sim) + ", degraded base " + List(base) + ", refined " +
                       List(refined) + ", stage-2 seconds " + List(secs, 0) + "; " + std::to_string(ok) +
                       "/3 seeds meet both bars"};
}

// ---------------------------------------------------------------------------
// 5. Action-manifold probe.

Outcome ActionManifold() {
  std::vector<double> ratio, base_mse, refined_mse;
  for (auto& p : Pipelines()) {
    const auto& run = p->Stage2(Variant::kBiInfoNceChunk, false);
    const double b = policy::ActionMseProbe(policy::BaseChunkFn(p->Base(), p->spec()), p->ProbeDemos(), p->spec());
    const double r = policy::ActionMseProbe(
        policy::RefinedChunkFn(p->Base(), run.result.residual, p->Bundle(), p->spec()), p->ProbeDemos(), p->spec());
    base_mse.push_back(b);
    refined_mse.push_back(r);
    ratio.push_back(r / b);
  }
  const double med = Median(ratio);
  return {med <= 0.9, "probe mse base " + List(base_mse, 5) + ", refined " + List(refined_mse, 5) +
                          ", refined/base " + List(ratio) + ", median " + Fixed(med, 3) + " (bar 0.9)"};
}

// ---------------------------------------------------------------------------
// 6. Objective ablation ordering.

Outcome AblationOrdering() {
  std::vector<double> chunk, global;
  int strict = 0;
  for (auto& p : Pipelines()) {
    chunk.push_back(p->RefinedSuccess(Variant::kBiInfoNceChunk, false));
    global.push_back(p->RefinedSuccess(Variant::kBiInfoNceGlobal, false));
    strict += chunk.back() > global.back();
  }
  const bool pass = Median(chunk) >= Median(global) && strict >= 2;
  return {pass, "success bi_infonce_chunk " + List(chunk) + " (median " + Fixed(Median(chunk), 3) +
                    "), bi_infonce_global " + List(global) + " (median " + Fixed(Median(global), 3) + "); chunk > "
                    "global in " + std::to_string(strict) + "/3 seeds"};
}

// ---------------------------------------------------------------------------
// 7. Robustness to imagined-rollout artifacts.

Outcome ArtifactRobustness() {
  std::vector<double> ratio, idm_drop, w2a_drop;
  bool ratios_ok = true;
  for (auto& p : Pipelines()) {
    const auto& report = p->IdmBaseline();
    ratio.push_back(report.mse_ratio);
    ratios_ok = ratios_ok && report.mse_ratio >= 1.1;
    const double idm_clean =
        p->Success("idm clean", [&] { return policy::BaseChunkFn(report.clean.policy, p->spec()); });
    const double idm_art =
        p->Success("idm artifacts", [&] { return policy::BaseChunkFn(report.artifact.policy, p->spec()); });
    idm_drop.push_back(idm_clean - idm_art);
    w2a_drop.push_back(p->RefinedSuccess(Variant::kBiInfoNceChunk, false) -
                       p->RefinedSuccess(Variant::kBiInfoNceChunk, true));
  }
  const bool pass = ratios_ok && Median(idm_drop) > Median(w2a_drop);
  return {pass, "latent_noise sigma " + Fixed(kArtifactSigma, 2) + ", idm label mse ratio " + List(ratio) +
                    ", success drop idm " + List(idm_drop) + " (median " + Fixed(Median(idm_drop), 3) +
                    "), stage-2 " + List(w2a_drop) + " (median " + Fixed(Median(w2a_drop), 3) + ")"};
}

// ---------------------------------------------------------------------------
// 8. Segmentation.

std::vector<double> ReadLengths(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string name;
    row >> name;
    if (name != key) continue;
    std::vector<double> out;
    for (double v; row >> v;) out.push_back(v);
    return out;
  }
  return {};
}

Outcome Segmentation() {
  using skillseg::Event;
  using skillseg::Segment;
  std::vector<std::string> failures;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  // Hand-computed fixtures.
  check(skillseg::ClassifyEvents({0.08, {0.080, 0.074}}) == std::vector<Event>{Event::kNonContact, Event::kContact},
        "threshold");
  {
    std::vector<Event> e(5, Event::kNonContact);
    for (int len : {6, 2, 7}) {
      e.insert(e.end(), len, Event::kContact);
      e.insert(e.end(), 5, Event::kNonContact);
    }
    const auto s = skillseg::BuildSegments(e);
    check(s.size() == 2 && s[0] == Segment{0, 10, std::string(skillseg::kUnlabeled), 5} &&
              s[1] == Segment{11, 29, std::string(skillseg::kUnlabeled), 23},
          "segments");
  }
  {
    skillseg::SegConfig cfg;
    cfg.closeness_window = 5;
    const std::vector<Segment> segs{{0, 120, "", 116}, {121, 233, "", 230}, {234, 240, "", 235}};
    const auto a = skillseg::AlignSchema(segs, skillseg::SkillSchema::Default(), "pick_and_place", cfg);
    check(a.accepted && a.segments[0].label == "pick" && a.segments[1].label == "place" &&
              a.segments[2].label == skillseg::kNoise,
          "116/230/235 prompt example");
    const auto under = skillseg::AlignSchema({segs[0]}, skillseg::SkillSchema::Default(), "pick_and_place", cfg);
    check(!under.accepted && under.missing == std::vector<std::string>{"place"}, "under-count rejection");
  }

  // Synchronization on 200 clean pick_and_place demos.
  const auto records = pipeline::GenerateDemos(200, TaskKind::kPickAndPlace, 0.0, 0);
  const auto summary = pipeline::SegmentRecords(records);
  check(summary.sync_rate >= 0.95, "sync rate");

  // Long-tail length fixture.
  const std::string text = pipeline::ReadTextFile(std::string(W2A_FIXTURE_DIR) + "/length_longtail.txt");
  const auto stats = skillseg::LengthStats(ReadLengths(text, "original"), ReadLengths(text, "segmented"));
  check(stats.density_ratio > 1.0, "density ratio");

  std::string detail = "golden fixtures " + std::string(failures.empty() ? "match" : "differ") + ", sync rate " +
                       Fixed(summary.sync_rate, 3) + " on 200 clean pick_and_place demos, median-density ratio " +
                       Fixed(stats.density_ratio, 3);
  for (const auto& f : failures) detail += "; failed: " + f;
  return {failures.empty(), detail};
}

// ---------------------------------------------------------------------------
// 9. Frozen components and zero-residual identity.

Outcome FrozenAndIdentity() {
  auto& p = *Pipelines().front();
  const auto& base = p.Base();
  const auto& bundle = p.Bundle();
  const std::uint64_t before[] = {base.net.Hash(), bundle.video_adapter().Hash(), bundle.action_adapter().Hash(),
                                  bundle.action_decoder().Hash(), p.clean_engine().feature_map().Hash()};
  // A short Stage-2 run of its own, so the check does not depend on the order
  // criteria run in.
  policy::Stage2Config cfg;
  cfg.iterations = 50;
  cfg.seed = p.seed();
  Rng rng(p.seed());
  const auto fresh = policy::ResidualPolicy::Initialize(cfg.residual, rng);
  const auto trained = policy::Stage2Train(base, fresh, bundle, p.clean_engine(), cfg);
  const std::uint64_t after[] = {base.net.Hash(), bundle.video_adapter().Hash(), bundle.action_adapter().Hash(),
                                 bundle.action_decoder().Hash(), p.clean_engine().feature_map().Hash()};
  int unchanged = 0;
  for (int i = 0; i < 5; ++i) unchanged += before[i] == after[i];
  const bool residual_moved = trained.residual.params.Hash() != fresh.params.Hash();

  const auto instructions = policy::EvalInstructions(200, 77);
  const auto routed = policy::RunEpisodes(policy::RoutedChunkFn(base, bundle, p.spec()), instructions, p.spec());
  const auto zero = policy::RunEpisodes(policy::RefinedChunkFn(base, fresh, bundle, p.spec()), instructions, p.spec());
  int identical = 0;
  for (std::size_t i = 0; i < instructions.size(); ++i) {
    bool same = routed[i].success == zero[i].success && routed[i].states.size() == zero[i].states.size();
    for (std::size_t t = 0; same && t < routed[i].states.size(); ++t)
      same = routed[i].states[t] == zero[i].states[t];
    identical += same;
  }
  const bool pass = unchanged == 5 && residual_moved && identical == static_cast<int>(instructions.size());
  return {pass, std::to_string(unchanged) + "/5 frozen hashes unchanged after 50 stage-2 iterations (residual " +
                    (residual_moved ? "updated" : "NOT updated") + "); zero-residual trajectories identical to "
                    "routed base in " + std::to_string(identical) + "/" + std::to_string(instructions.size()) +
                    " episodes"};
}

// ---------------------------------------------------------------------------
// 10. Determinism of the full pipeline.

// gen-demos, train-base, train-stage1, train-stage2 and the metric CSVs,
// written under `dir`. Step counts are reduced; determinism does not depend
// on run length.
std::map<std::string, std::string> RunPipelineOnce(const fs::path& dir) {
  pipeline::RunConfig c = pipeline::DefaultRunConfig();
  c.seed = 11;
  c.paths.demos = dir / "demos.jsonl";
  c.paths.checkpoints = dir / "checkpoints";
  c.paths.metrics = dir / "metrics";
  c.bc.epochs = 3;
  c.bc.demo_count = kDegradedDemos;
  c.bc.label_noise = kDegradedNoise;
  c.stage1.steps = 200;
  c.stage2.iterations = 20;
  c.PropagateSeed();
  fs::create_directories(c.paths.metrics);
  pipeline::WriteDemos(c.paths.demos, pipeline::GenerateDemos(80, std::nullopt, 0.0, c.seed, c.env));
  const auto demos = pipeline::LoadDemos(c);
  pipeline::SaveParams(pipeline::BaseCheckpoint(c), policy::BcTrain(demos, c.bc, c.env).net);
  const worldmodel::ImaginationEngine engine({}, c.env);
  const auto s1 = adapters::Stage1Train(pipeline::Stage1Examples(demos, engine), c.stage1);
  pipeline::SaveParams(pipeline::Stage1Checkpoint(c), s1.bundle.params());
  pipeline::WriteTextFile(c.paths.metrics / "stage1.csv", pipeline::Stage1Csv(s1.log));
  const auto s2 = policy::Stage2Train(pipeline::LoadBasePolicy(c), pipeline::FreshResidual(c),
                                      pipeline::LoadAdapterBundle(c), engine, c.stage2);
  pipeline::SaveParams(pipeline::Stage2Checkpoint(c), s2.residual.params);
  pipeline::WriteTextFile(c.paths.metrics / "stage2.csv", pipeline::Stage2Csv(s2.log));

  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files[fs::relative(entry.path(), dir).string()] = pipeline::ReadTextFile(entry.path());
  }
  return files;
}

Outcome Determinism() {
  const fs::path root = fs::temp_directory_path() / "w2a_acceptance_determinism";
  fs::remove_all(root);
  const auto a = RunPipelineOnce(root / "a");
  const auto b = RunPipelineOnce(root / "b");
  int same = 0;
  std::string differing;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it != b.end() && it->second == bytes) {
      ++same;
    } else {
      differing += " " + name;
    }
  }
  fs::remove_all(root);
  const bool pass = same == static_cast<int>(a.size()) && a.size() == b.size() && a.size() >= 6;
  return {pass, std::to_string(same) + "/" + std::to_string(a.size()) +
                    " files byte-identical across two runs (demos, 3 checkpoints, 2 metric CSVs)" +
                    (differing.empty() ? "" : "; differ:" + differing)};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "gradient correctness", GradientCorrectness},
    {2, "loss oracle equivalence", LossOracle},
    {3, "stage-1 held-out recon and alignment", Stage1Alignment},
    {4, "stage-2 similarity and success over degraded base", Stage2Improvement},
    {5, "action-manifold probe", ActionManifold},
    {6, "objective ablation ordering", AblationOrdering},
    {7, "robustness to imagination artifacts", ArtifactRobustness},
    {8, "skill segmentation", Segmentation},
    {9, "frozen components and zero-residual identity", FrozenAndIdentity},
    {10, "pipeline determinism", Determinism},
};

}  // namespace
}  // namespace w2a::acceptance

int main(int argc, char** argv) {
  using namespace w2a::acceptance;
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  int ran = 0;
  for (const Criterion& c : kCriteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    std::fprintf(stderr, "criterion %d: %s\n", c.id, c.name);
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    ++ran;
    failed += !o.pass;
    std::printf("[%s] criterion %d (%s): %s [%.0f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                Seconds(start));
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
