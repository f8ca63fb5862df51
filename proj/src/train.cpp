#include "nf/train.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>

#include "nf/coupling.hpp"
#include "nf/lu_linear.hpp"

namespace nf {

namespace {

void checkConfig(const TrainConfig& cfg) {
  if (!(cfg.learningRate > 0) || !std::isfinite(cfg.learningRate)) {
    throw DomainError("train: learning rate must be positive and finite");
  }
  if (!(cfg.clipNorm > 0) || !std::isfinite(cfg.clipNorm)) {
    throw DomainError("train: clip norm must be positive and finite");
  }
  if (!(cfg.beta1 > 0 && cfg.beta1 < 1) || !(cfg.beta2 > 0 && cfg.beta2 < 1)) {
    throw DomainError("train: betas must lie in (0, 1)");
  }
  if (!(cfg.epsilon > 0) || !std::isfinite(cfg.epsilon)) {
    throw DomainError("train: epsilon must be positive and finite");
  }
  if (cfg.batchSize < 1) throw DomainError("train: batch size must be positive");
  if (cfg.maxSteps < 0) throw DomainError("train: max steps must be non-negative");
  if (cfg.checkpointEvery < 1) {
    throw DomainError("train: checkpoint interval must be positive");
  }
}

bool allFinite(const Tensor& t) {
  return t.data().isFinite().all();
}

}  // namespace

Split trainValSplit(Index n, std::uint64_t seed) {
  if (n < 1) throw DomainError("split: need at least one row");
  std::vector<Index> idx(n);
  std::iota(idx.begin(), idx.end(), Index{0});
  CounterRng rng(seed);
  for (Index i = n - 1; i > 0; --i) {
    Index j = static_cast<Index>(rng.nextBelow(static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[i], idx[j]);
  }
  const Index valCount = n / 10;
  Split s;
  s.train.assign(idx.begin(), idx.end() - valCount);
  s.val.assign(idx.end() - valCount, idx.end());
  return s;
}

std::vector<Index> drawBatch(CounterRng& rng, const std::vector<Index>& pool,
                             Index batchSize) {
  if (pool.empty()) throw DomainError("batch: pool is empty");
  if (batchSize < 1) throw DomainError("batch: size must be positive");
  std::vector<Index> out(batchSize);
  for (Index k = 0; k < batchSize; ++k) {
    out[k] = pool[rng.nextBelow(pool.size())];
  }
  return out;
}

Tensor gatherRows(const Tensor& data, const std::vector<Index>& rows) {
  if (data.rank() != 2) {
    throw ShapeError("gather: expected a rank-2 tensor, got " + shapeString(data));
  }
  if (rows.empty()) throw ShapeError("gather: empty row list");
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), data.cols());
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= data.rows()) {
      throw ShapeError("gather: row " + std::to_string(rows[r]) +
                       " out of range for " + std::to_string(data.rows()) +
                       " rows");
    }
    for (Index c = 0; c < data.cols(); ++c) {
      out(static_cast<Index>(r), c) = data.at(rows[r], c);
    }
  }
  return Tensor::fromMatrix(out);
}

double meanNll(const FlowModel& model, const Tensor& batch) {
  Eigen::VectorXd lp;
  try {
    lp = model.logProbBatch(batch);
  } catch (const OutOfSupportError&) {
    throw;
  } catch (const DomainError& e) {
    for (Index r = 0; r < batch.rows(); ++r) {
      try {
        (void)model.logProbBatch(gatherRows(batch, {r}));
      } catch (const DomainError&) {
        throw OutOfSupportError(
            r, "nll: row " + std::to_string(r) +
                   " is outside the model's support (" + e.what() + ")");
      }
    }
    throw;
  }
  for (Index r = 0; r < lp.size(); ++r) {
    if (std::isinf(lp[r]) && lp[r] < 0) {
      throw OutOfSupportError(r, "nll: row " + std::to_string(r) +
                                     " has zero density under the model");
    }
  }
  double total = 0;
  for (Index r = 0; r < lp.size(); ++r) total += -lp[r];
  return total / static_cast<double>(lp.size());
}

NodeId recordMeanNll(Tape& tape, FlowModel& model, const Tensor& batch,
                     std::vector<ParamBinding>* bindings) {
  if (batch.rank() != 2 || batch.cols() != model.dim()) {
    throw ShapeError("nll: expected a (rows x " + std::to_string(model.dim()) +
                     ") batch, got " + shapeString(batch));
  }
  const auto* normal =
      dynamic_cast<const DiagonalStandardNormal*>(&model.base());
  if (!normal) {
    throw DomainError("nll: gradient path requires a diagonal standard normal base");
  }
  NodeId x = tape.constant(batch);
  TapeStep s = model.chain().forwardOnTape(tape, x, bindings);
  NodeId total = tape.add(normal->logProbTotalOnTape(tape, s.y),
                          tape.sum(s.logDet));
  NodeId scale =
      tape.constant(Tensor::scalar(1.0 / static_cast<double>(batch.rows())));
  return tape.mul(scale, tape.neg(total));
}

void clipToNorm(Tensor& g, double clipNorm) {
  if (!(clipNorm > 0) || !std::isfinite(clipNorm)) {
    throw DomainError("clip: norm bound must be positive and finite");
  }
  double sq = 0;
  for (Index i = 0; i < g.size(); ++i) sq += g.at(i) * g.at(i);
  const double norm = std::sqrt(sq);
  if (norm > clipNorm) {
    const double scale = clipNorm / norm;
    for (Index i = 0; i < g.size(); ++i) g.at(i) *= scale;
  }
}

void adamUpdate(Tensor& theta, const Tensor& g, Tensor& m, Tensor& v,
                Index step, const TrainConfig& cfg) {
  if (!theta.sameShape(g) || !theta.sameShape(m) || !theta.sameShape(v)) {
    throw ShapeError("adam: parameter, gradient, and moment shapes must match");
  }
  if (step < 1) throw DomainError("adam: step count is 1-based");
  const double b1 = cfg.beta1;
  const double b2 = cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (Index i = 0; i < theta.size(); ++i) {
    m.at(i) = b1 * m.at(i) + (1.0 - b1) * g.at(i);
    v.at(i) = b2 * v.at(i) + (1.0 - b2) * g.at(i) * g.at(i);
    const double mhat = m.at(i) / c1;
    const double vhat = v.at(i) / c2;
    theta.at(i) -= cfg.learningRate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

FitResult fit(FlowModel& model, const Tensor& data, const TrainConfig& cfg,
              const CheckpointSink& sink, const Checkpoint* resume,
              ImageShape image) {
  checkConfig(cfg);
  if (data.rank() != 2 || data.cols() != model.dim()) {
    throw ShapeError("fit: expected a (rows x " + std::to_string(model.dim()) +
                     ") dataset, got " + shapeString(data));
  }
  if (data.rows() < 1) throw ShapeError("fit: dataset is empty");

  const Split split =
      trainValSplit(data.rows(), deriveSeed(cfg.seed, kSplitStream));
  Tensor valData;
  if (!split.val.empty()) valData = gatherRows(data, split.val);

  std::vector<ParamRef> params = model.chain().parameters();
  std::unordered_map<const Tensor*, size_t> slotOf;
  for (size_t i = 0; i < params.size(); ++i) slotOf[params[i].value] = i;

  std::vector<Tensor> m, v;
  m.reserve(params.size());
  v.reserve(params.size());
  for (const auto& p : params) {
    m.push_back(Tensor::zeros(p.value->shape()));
    v.push_back(Tensor::zeros(p.value->shape()));
  }

  Index startStep = 0;
  CounterRng loopRng(deriveSeed(cfg.seed, kBatchStream));
  if (resume) {
    if (resume->dim != model.dim()) {
      throw DataError("fit: checkpoint dim " + std::to_string(resume->dim) +
                      " does not match model dim " + std::to_string(model.dim()));
    }
    if (resume->adamM.size() != params.size() ||
        resume->adamV.size() != params.size()) {
      throw DataError("fit: checkpoint optimizer slots do not match the model");
    }
    for (size_t i = 0; i < params.size(); ++i) {
      if (resume->adamM[i].first != params[i].name ||
          resume->adamV[i].first != params[i].name ||
          !resume->adamM[i].second.sameShape(*params[i].value) ||
          !resume->adamV[i].second.sameShape(*params[i].value)) {
        throw DataError("fit: checkpoint optimizer slot '" +
                        resume->adamM[i].first +
                        "' does not match parameter '" + params[i].name + "'");
      }
      m[i] = resume->adamM[i].second;
      v[i] = resume->adamV[i].second;
    }
    startStep = resume->step;
    loopRng = CounterRng(resume->rngSeed, resume->rngCounter);
    if (!image.valid()) image = resume->image;
  }

  auto makeCk = [&](Index atStep) {
    Checkpoint ck;
    ck.step = atStep;
    ck.dim = model.dim();
    ck.image = image;
    ck.topology = model.chain().toJson();
    for (size_t i = 0; i < params.size(); ++i) {
      ck.adamM.emplace_back(params[i].name, m[i]);
      ck.adamV.emplace_back(params[i].name, v[i]);
    }
    ck.rngSeed = loopRng.seed();
    ck.rngCounter = loopRng.counter();
    return ck;
  };

  FitResult out;
  Index lastSunk = -1;
  for (Index step = startStep; step < cfg.maxSteps; ++step) {
    const std::vector<Index> batchIdx =
        drawBatch(loopRng, split.train, cfg.batchSize);
    const Tensor batch = gatherRows(data, batchIdx);

    try {
      const double trainNll = meanNll(model, batch);
      const double valNll =
          split.val.empty() ? trainNll : meanNll(model, valData);
      out.history.push_back({step, trainNll, valNll});

      Tape tape;
      std::vector<ParamBinding> bindings;
      const NodeId loss = recordMeanNll(tape, model, batch, &bindings);
      const Tape::Gradients grads = tape.backward(loss);

      std::vector<Tensor> g;
      g.reserve(params.size());
      for (const auto& p : params) g.push_back(Tensor::zeros(p.value->shape()));
      for (const auto& b : bindings) {
        auto it = slotOf.find(b.storage);
        if (it == slotOf.end()) {
          throw std::logic_error("fit: gradient for a tensor the chain does not own");
        }
        if (grads.has(b.node)) g[it->second].data() += grads.at(b.node).data();
      }

      std::vector<Tensor> newM = m;
      std::vector<Tensor> newV = v;
      std::vector<Tensor> newTheta;
      newTheta.reserve(params.size());
      for (const auto& p : params) newTheta.push_back(*p.value);
      for (size_t i = 0; i < params.size(); ++i) {
        clipToNorm(g[i], cfg.clipNorm);
        adamUpdate(newTheta[i], g[i], newM[i], newV[i], step + 1, cfg);
        if (!allFinite(newTheta[i]) || !allFinite(newM[i]) ||
            !allFinite(newV[i])) {
          throw NumericError("fit: parameter '" + params[i].name +
                             "' became non-finite");
        }
      }
      for (size_t i = 0; i < params.size(); ++i) {
        *params[i].value = std::move(newTheta[i]);
        m[i] = std::move(newM[i]);
        v[i] = std::move(newV[i]);
      }
    } catch (const NumericError& e) {
      if (sink) sink(makeCk(step));
      throw NumericError(std::string(e.what()) + " (aborted at step " +
                         std::to_string(step) +
                         "; the checkpoint holds the last finite state)");
    }

    if (sink && (step + 1) % cfg.checkpointEvery == 0) {
      sink(makeCk(step + 1));
      lastSunk = step + 1;
    }
  }

  const Index endStep = std::max(startStep, cfg.maxSteps);
  out.final = makeCk(endStep);
  if (sink && lastSunk != endStep) sink(out.final);
  return out;
}

Chain buildFlowChain(Index dim, Index couplings, Index hidden, bool luMixing,
                     bool withSquash, std::uint64_t seed) {
  if (dim < 2) throw ShapeError("flow chain: dim must be at least 2");
  if (couplings < 1) throw ShapeError("flow chain: need at least one coupling");
  Chain chain;
  if (withSquash) chain.append(std::make_unique<LogitSquash>(dim));
  CounterRng initRng(deriveSeed(seed, kInitStream));
  for (Index k = 0; k < couplings; ++k) {
    chain.append(std::make_unique<AffineCoupling>(dim, hidden,
                                                  static_cast<int>(k % 2),
                                                  initRng));
  }
  if (luMixing) chain.append(LULinear::identity(dim));
  return chain;
}

CoinMleResult coinMle(Index successes, Index trials, double gridStep) {
  if (successes < 0 || trials < 0 || successes > trials) {
    throw DomainError("coin: need 0 <= successes <= trials");
  }
  if (!(gridStep > 0.0) || !(gridStep < 1.0) || !std::isfinite(gridStep)) {
    throw DomainError("coin: grid step must lie in (0, 1)");
  }

  const auto den = static_cast<std::uint64_t>(std::llround(1.0 / gridStep));
  const bool rational =
      den >= 2 && std::abs(static_cast<double>(den) * gridStep - 1.0) <= 1e-9;

  CoinMleResult out;
  if (rational) {
    for (std::uint64_t k = 1; k < den; ++k) {
      const double p = static_cast<double>(k) / static_cast<double>(den);
      double num = 1.0;
      for (Index i = 0; i < successes; ++i) num *= static_cast<double>(k);
      for (Index i = 0; i < trials - successes; ++i) {
        num *= static_cast<double>(den - k);
      }
      double denom = 1.0;
      for (Index i = 0; i < trials; ++i) denom *= static_cast<double>(den);
      double like = num / denom;
      if (!std::isfinite(num) || !std::isfinite(denom)) {
        like = 1.0;
        for (Index i = 0; i < successes; ++i) like *= p;
        for (Index i = 0; i < trials - successes; ++i) like *= 1.0 - p;
      }
      out.table.emplace_back(p, like);
    }
  } else {
    for (Index k = 1;; ++k) {
      const double p = gridStep * static_cast<double>(k);
      if (!(p < 1.0)) break;
      double like = 1.0;
      for (Index i = 0; i < successes; ++i) like *= p;
      for (Index i = 0; i < trials - successes; ++i) like *= 1.0 - p;
      out.table.emplace_back(p, like);
    }
  }

  size_t best = 0;
  for (size_t i = 1; i < out.table.size(); ++i) {
    if (out.table[i].second > out.table[best].second) best = i;
  }
  out.pHat = out.table[best].first;
  return out;
}

}  // namespace nf
