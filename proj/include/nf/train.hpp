#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "nf/checkpoint.hpp"
#include "nf/density.hpp"
#include "nf/rng.hpp"
#include "nf/tape.hpp"
#include "nf/tensor.hpp"

namespace nf {

/// Stream tags that split one user seed into independent RNG streams via
/// deriveSeed. Fixed values: changing any of them changes every seeded run.
inline constexpr std::uint64_t kInitStream = 0x11;
inline constexpr std::uint64_t kSplitStream = 0x22;
inline constexpr std::uint64_t kBatchStream = 0x33;
inline constexpr std::uint64_t kNoiseStream = 0x44;

struct TrainConfig {
  double learningRate = 1e-4;
  double clipNorm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Index batchSize = 256;
  Index maxSteps = 0;
  std::uint64_t seed = 42;
  Index checkpointEvery = 500;
};

/// Losses recorded before the update at each step. trainNll is the
/// minibatch loss, valNll the loss over the held-out split (equal to
/// trainNll when the dataset is too small to hold anything out).
struct HistoryRow {
  Index step = 0;
  double trainNll = 0;
  double valNll = 0;
};

struct Split {
  std::vector<Index> train;
  std::vector<Index> val;
};

/// Shuffles [0, n) and holds out the last tenth (rounded down) for
/// validation. Pure function of (n, seed).
Split trainValSplit(Index n, std::uint64_t seed);

/// batchSize with-replacement draws from pool, one counter increment per
/// draw, in draw order.
std::vector<Index> drawBatch(CounterRng& rng, const std::vector<Index>& pool,
                             Index batchSize);

/// Copies the given rows of data into a new tensor, in the given order.
Tensor gatherRows(const Tensor& data, const std::vector<Index>& rows);

/// Mean negative log density of the batch under the model. A row the model
/// gives zero density raises OutOfSupportError naming that row.
double meanNll(const FlowModel& model, const Tensor& batch);

/// Records the same mean NLL on the tape and returns the scalar loss node:
///   loss = (1 / rows) * -(total base log-prob + total log-det).
/// Requires a diagonal standard normal base. Bindings map every trainable
/// tensor read during the forward pass to its tape node.
NodeId recordMeanNll(Tape& tape, FlowModel& model, const Tensor& batch,
                     std::vector<ParamBinding>* bindings);

/// Scales g in place so its l2 norm is at most clipNorm; shorter gradients
/// pass through untouched.
void clipToNorm(Tensor& g, double clipNorm);

/// One Adam update on a single tensor with bias correction; step is the
/// 1-based global step count.
void adamUpdate(Tensor& theta, const Tensor& g, Tensor& m, Tensor& v,
                Index step, const TrainConfig& cfg);

using CheckpointSink = std::function<void(const Checkpoint&)>;

struct FitResult {
  std::vector<HistoryRow> history;
  Checkpoint final;
};

/// Minibatch Adam on the model's chain. Per step: draw a batch from the
/// train split (with replacement), record losses, backprop the tape loss,
/// clip each parameter's gradient tensor, update. The sink receives a
/// checkpoint every checkpointEvery steps and at exit. Identical
/// (data, config) runs produce bit-identical histories and parameters, and
/// resuming from a checkpoint of the same run continues bit-identically.
/// A non-finite value during the step aborts with NumericError after
/// delivering a checkpoint of the last finite state.
FitResult fit(FlowModel& model, const Tensor& data, const TrainConfig& cfg,
              const CheckpointSink& sink = {},
              const Checkpoint* resume = nullptr, ImageShape image = {});

/// Stacks `couplings` affine couplings with alternating parity, optionally
/// preceded by a logit squash (pixel-valued data) and followed by one
/// identity-initialized LU mixing layer. Coupling weights draw from the
/// (seed, kInitStream) stream; the stack maps the identity at init.
Chain buildFlowChain(Index dim, Index couplings, Index hidden, bool luMixing,
                     bool withSquash, std::uint64_t seed);

/// Grid-search MLE for a Bernoulli rate: evaluates the likelihood
/// p^s * (1-p)^(t-s) over {g, 2g, ...} below 1 and returns the full table
/// plus the maximizer (smallest grid point on ties). When 1/g is an
/// integer the likelihoods are computed as exact integer ratios.
struct CoinMleResult {
  double pHat = 0;
  std::vector<std::pair<double, double>> table;
};

CoinMleResult coinMle(Index successes, Index trials, double gridStep);

}  // namespace nf
