#pragma once

#include <optional>
#include <vector>

#include "drafter/dist.hpp"
#include "drafter/model.hpp"

namespace drafter {

// Binary per-token reward: r(x) = 1 iff q(x) > p(x) strictly, so exact ties
// earn no reward.
struct RewardVector {
    std::vector<double> r;
};
RewardVector reward_vector(const Dist& p, const Dist& q);

// Moments of the reward population behind advantage normalization.
struct AdvantageStats {
    double mu = 0.0;
    double sigma = 0.0;
    int64_t n = 0;
};

// Mergeable accumulator for AdvantageStats (two-pass batch reductions).
struct RewardMoments {
    int64_t n = 0;
    double sum = 0.0;
    double sum_sq = 0.0;

    void add(double r) {
        ++n;
        sum += r;
        sum_sq += r * r;
    }
    void merge(const RewardMoments& o) {
        n += o.n;
        sum += o.sum;
        sum_sq += o.sum_sq;
    }
    AdvantageStats finalize() const;
};

constexpr double kSigmaGuard = 1e-8;

enum class LossKind { kld, tvd, tvdpp };
const char* loss_kind_name(LossKind k);
std::optional<LossKind> parse_loss_kind(const std::string& name);

// Mean positional KL between softmax(draft_logits) and q. Throws
// TrainingError when the divergence is infinite (absolute-continuity
// failure in the configured direction).
GradReport kld_loss_and_grad(const Tensor& draft_logits, const std::vector<Dist>& q,
                             KlDirection dir = KlDirection::forward);

// Mean positional total variation distance with its exact closed-form
// (sub)gradient through softmax: dlogits(x) = p(x) (A - r(x)) / positions,
// A = sum_x p(x) r(x).
GradReport tvd_loss_and_grad(const Tensor& draft_logits, const std::vector<Dist>& q);

// Score-function Monte Carlo estimator of the TVD gradient:
// mean_i of grad log p(x_i) * (-r(x_i)) over n_samples draws per position.
// Reported loss is the exact tvd for logging.
GradReport tvd_reinforce_grad(const Tensor& draft_logits, const std::vector<Dist>& q, int n_samples,
                              RngStream& rng);

struct TvdppOptions {
    enum class Mode { full_support, sampled };
    Mode mode = Mode::full_support;
    int n_samples = 256;         // sampled mode draws per position
    bool per_position_stats = false;  // ablation: moments per position instead of per call
    bool literal_sign = false;   // flip to the ascent sign for comparison runs
};

// Advantage-normalized TVD gradient: a(x) = (r(x) - mu) / max(sigma, guard)
// with moments over the full population (all positions x entire vocabulary
// in full_support mode, drawn samples in sampled mode). Default sign is the
// descent direction (increase p where q > p). Reported loss is the exact
// tvd for logging.
GradReport tvdpp_grad(const Tensor& draft_logits, const std::vector<Dist>& q, const TvdppOptions& opt,
                      RngStream* rng = nullptr, AdvantageStats* stats_out = nullptr);

// Two-phase pieces used when the advantage population spans several
// sequences (the mixed-batch path): accumulate moments first, then apply.
RewardMoments reward_moments(const Tensor& draft_logits, const std::vector<Dist>& q);
GradReport tvdpp_grad_with_stats(const Tensor& draft_logits, const std::vector<Dist>& q,
                                 const AdvantageStats& stats, bool literal_sign);

enum class PretrainShareLoss { distill, ce };

struct MixedBatchOptions {
    LossKind loss = LossKind::tvdpp;
    KlDirection kld_direction = KlDirection::forward;
    TvdppOptions tvdpp;
    PretrainShareLoss pretrain_loss = PretrainShareLoss::distill;
};

// Gradient of one mixed training batch: the configured distillation loss on
// the distill sequences (teacher distributions computed live from the
// target model) plus the configured share loss on the pretrain sequences,
// combined as a mean over all sequences. Throws ValidationError on an
// empty batch.
ParamList mixed_batch_grad(const ToyLm& draft, const ToyLm& target,
                           const std::vector<std::vector<TokenId>>& distill_batch,
                           const std::vector<std::vector<TokenId>>& pretrain_batch,
                           const MixedBatchOptions& opt, double* mean_loss = nullptr);

// Teacher next-token distributions at every position of tokens (plain
// softmax of the target logits).
std::vector<Dist> teacher_dists(const ToyLm& target, std::span<const TokenId> tokens);

// Mean positional tvd(softmax(draft logits), teacher) over a set of
// sequences; the held-out alignment metric.
double mean_tvd_to_teacher(const ToyLm& draft, const ToyLm& target,
                           const std::vector<std::vector<TokenId>>& seqs);

}  // namespace drafter
