#include <CLI11.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "nf/checkpoint.hpp"
#include "nf/data.hpp"
#include "nf/density.hpp"
#include "nf/image.hpp"
#include "nf/rng.hpp"
#include "nf/train.hpp"

namespace fs = std::filesystem;
using namespace nf;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void ensureDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw DataError("cannot create directory '" + dir + "': " + ec.message());
  }
}

void writeTextFile(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw DataError("failed while writing '" + path + "'");
}

FlowModel modelFromCheckpoint(const Checkpoint& ck) {
  return FlowModel(std::make_unique<DiagonalStandardNormal>(ck.dim),
                   ck.instantiateChain());
}

std::vector<GrayImage> loadPgmDir(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    throw DataError("'" + dir + "' is not a directory of .pgm files");
  }
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".pgm") {
      paths.push_back(entry.path().string());
    }
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw DataError("no .pgm files in '" + dir + "'");
  std::vector<GrayImage> imgs;
  imgs.reserve(paths.size());
  for (const std::string& p : paths) {
    imgs.push_back(loadPgm(p));
    if (imgs.back().width != imgs.front().width ||
        imgs.back().height != imgs.front().height) {
      throw DataError(p + ": extent differs from the first image in the set");
    }
  }
  return imgs;
}

/// Pixel rows lifted to the unit interval with seeded noise. This is the
/// pre-squash stage, so a trained chain (squash first) applies directly.
Tensor imagesToUnit(const std::vector<GrayImage>& imgs, std::uint64_t seed) {
  const Index n = imgs.front().width * imgs.front().height;
  Tensor x = Tensor::zeros({static_cast<Index>(imgs.size()), n});
  CounterRng rng(seed);
  for (Index r = 0; r < static_cast<Index>(imgs.size()); ++r) {
    const GrayImage& img = imgs[static_cast<size_t>(r)];
    for (Index j = 0; j < n; ++j) {
      const double p = static_cast<double>(img.pixels[static_cast<size_t>(j)]);
      x.at(r, j) = (p + rng.nextUniform()) / 256.0;
    }
  }
  return x;
}

int runDemoTransforms(Index count, std::uint64_t seed,
                      const std::string& outDir) {
  ensureDir(outDir);
  Chain chain = crescentChain();
  CounterRng rng(seed);
  Tensor z = Tensor::zeros({count, 2});
  for (Index i = 0; i < z.size(); ++i) z.at(i) = rng.nextNormal();

  std::vector<Tensor> stages;
  stages.push_back(z);  // step0: the seeded draw
  stages.push_back(z);  // step1: the pipeline's first stage is that draw
  stages.push_back(chain.step(2).inverseBatch(stages[1]).y);  // stretch
  stages.push_back(chain.step(1).inverseBatch(stages[2]).y);  // rotate
  stages.push_back(chain.step(0).inverseBatch(stages[3]).y);  // shear
  stages.push_back(chain.step(0).forwardBatch(stages[4]).y);  // unshear
  stages.push_back(chain.step(1).forwardBatch(stages[5]).y);  // unrotate
  stages.push_back(chain.step(2).forwardBatch(stages[6]).y);  // unstretch

  for (size_t k = 0; k < stages.size(); ++k) {
    Dataset ds;
    ds.dim = 2;
    ds.points = stages[k];
    ds.source = "demo-transforms step " + std::to_string(k);
    writeCsv(ds, outDir + "/step" + std::to_string(k) + ".csv");
  }

  double maxErr = 0;
  for (Index i = 0; i < z.size(); ++i) {
    maxErr = std::max(maxErr, std::abs(stages[7].at(i) - z.at(i)));
  }
  std::printf("wrote step0.csv ... step7.csv to %s\n", outDir.c_str());
  std::printf("round-trip max error: %.3g\n", maxErr);
  return 0;
}

int runDemoDisc(const std::string& outFile) {
  Chain chain;
  chain.append(
      std::make_unique<Inverted>(std::make_unique<SquareScale1D>(M_PI / 4.0)));
  FlowModel model(std::make_unique<UniformInterval>(5.0, 6.0),
                  std::move(chain));

  const double lo = 25.0 * M_PI / 4.0;
  const double hi = 9.0 * M_PI;
  std::string text = "A,p_analytic,p_flow\n";
  double maxGap = 0;
  std::vector<double> as(100), ps(100);
  for (int i = 0; i < 100; ++i) {
    const double a = (lo * (99 - i) + hi * i) / 99.0;
    const double analytic = 1.0 / std::sqrt(a * M_PI);
    Eigen::VectorXd x(1);
    x[0] = a;
    const double flow = std::exp(model.logProb(x));
    text += fmt(a) + "," + fmt(analytic) + "," + fmt(flow) + "\n";
    maxGap = std::max(maxGap, std::abs(flow - analytic));
    as[static_cast<size_t>(i)] = a;
    ps[static_cast<size_t>(i)] = flow;
  }
  double integral = 0;
  for (size_t i = 1; i < 100; ++i) {
    integral += 0.5 * (ps[i] + ps[i - 1]) * (as[i] - as[i - 1]);
  }
  writeTextFile(outFile, text);
  std::printf("wrote %s (100 rows)\n", outFile.c_str());
  std::printf("max |p_flow - p_analytic| = %.3g\n", maxGap);
  std::printf("trapezoid integral = %.6f\n", integral);
  return 0;
}

int runDemoCoin(Index successes, Index trials, double grid) {
  CoinMleResult res = coinMle(successes, trials, grid);
  std::printf("p        likelihood\n");
  for (const auto& row : res.table) {
    std::printf("%-8.6g %.10g\n", row.first, row.second);
  }
  std::printf("p_hat = %.10g\n", res.pHat);
  return 0;
}

struct TrainFlags {
  std::string data, out;
  bool image = false;
  bool luMixing = false;
  Index couplings = 6;
  Index hidden = 128;
  Index batch = 256;
  Index steps = 1000;
  Index ckEvery = 500;
  double lr = 1e-4;
  double clip = 1.0;
  std::uint64_t seed = 42;
};

int runTrain(const TrainFlags& f) {
  ensureDir(f.out);
  Tensor rows;
  ImageShape shape;
  Index dim = 0;
  if (f.image) {
    std::vector<GrayImage> imgs = loadPgmDir(f.data);
    shape.width = imgs.front().width;
    shape.height = imgs.front().height;
    dim = shape.width * shape.height;
    rows = imagesToUnit(imgs, deriveSeed(f.seed, kNoiseStream));
  } else {
    Dataset ds = loadCsv(f.data);
    dim = ds.dim;
    rows = ds.points;
  }

  Chain chain =
      buildFlowChain(dim, f.couplings, f.hidden, f.luMixing, f.image, f.seed);
  FlowModel model(std::make_unique<DiagonalStandardNormal>(dim),
                  std::move(chain));

  TrainConfig cfg;
  cfg.learningRate = f.lr;
  cfg.clipNorm = f.clip;
  cfg.batchSize = f.batch;
  cfg.maxSteps = f.steps;
  cfg.seed = f.seed;
  cfg.checkpointEvery = f.ckEvery;

  CheckpointSink sink = [&](const Checkpoint& ck) {
    ck.save(f.out + "/checkpoint_" + std::to_string(ck.step) + ".json");
  };
  FitResult res = fit(model, rows, cfg, sink, nullptr, shape);
  res.final.save(f.out + "/model.json");

  std::string loss = "step,train_nll,val_nll\n";
  for (const HistoryRow& row : res.history) {
    loss += std::to_string(row.step) + "," + fmt(row.trainNll) + "," +
            fmt(row.valNll) + "\n";
  }
  writeTextFile(f.out + "/loss.csv", loss);

  if (res.history.empty()) {
    std::printf("no steps requested; wrote the initialized model\n");
  } else {
    const HistoryRow& first = res.history.front();
    const HistoryRow& last = res.history.back();
    std::printf("step %ld: train nll %.6f, val nll %.6f\n",
                static_cast<long>(first.step), first.trainNll, first.valNll);
    std::printf("step %ld: train nll %.6f, val nll %.6f\n",
                static_cast<long>(last.step), last.trainNll, last.valNll);
    if (f.image) {
      const double denom = static_cast<double>(dim) * std::log(2.0);
      std::printf("bits per dim: %.4f -> %.4f\n", first.valNll / denom,
                  last.valNll / denom);
    }
  }
  std::printf("final checkpoint: %s/model.json\n", f.out.c_str());
  return 0;
}

int runSample(const std::string& ckPath, Index count, std::uint64_t seed,
              const std::string& out) {
  Checkpoint ck = Checkpoint::load(ckPath);
  FlowModel model = modelFromCheckpoint(ck);
  Tensor pts = model.sample(count, seed);
  if (ck.image.valid()) {
    ensureDir(out);
    const Index n = ck.image.width * ck.image.height;
    for (Index r = 0; r < count; ++r) {
      GrayImage img(ck.image.width, ck.image.height);
      for (Index j = 0; j < n; ++j) {
        double v = std::floor(pts.at(r, j) * 256.0);
        v = std::max(0.0, std::min(255.0, v));
        img.pixels[static_cast<size_t>(j)] = static_cast<std::uint8_t>(v);
      }
      char name[32];
      std::snprintf(name, sizeof(name), "sample_%03ld.pgm",
                    static_cast<long>(r));
      savePgm(img, out + "/" + name);
    }
    std::printf("wrote %ld images to %s\n", static_cast<long>(count),
                out.c_str());
  } else {
    Dataset ds;
    ds.dim = ck.dim;
    ds.points = pts;
    ds.source = "sample(count=" + std::to_string(count) +
                    ", seed=" + std::to_string(seed) + ")";
    writeCsv(ds, out);
    std::printf("wrote %ld rows to %s\n", static_cast<long>(count),
                out.c_str());
  }
  return 0;
}

int runLogprob(const std::string& ckPath, const std::string& dataPath,
               std::uint64_t seed, const std::string& out) {
  Checkpoint ck = Checkpoint::load(ckPath);
  FlowModel model = modelFromCheckpoint(ck);
  Tensor rows;
  if (ck.image.valid()) {
    std::vector<GrayImage> imgs = loadPgmDir(dataPath);
    if (imgs.front().width != ck.image.width ||
        imgs.front().height != ck.image.height) {
      throw DataError("images are " + std::to_string(imgs.front().width) +
                      "x" + std::to_string(imgs.front().height) +
                      " but the checkpoint expects " +
                      std::to_string(ck.image.width) + "x" +
                      std::to_string(ck.image.height));
    }
    rows = imagesToUnit(imgs, deriveSeed(seed, kNoiseStream));
  } else {
    Dataset ds = loadCsv(dataPath);
    if (ds.dim != ck.dim) {
      throw DataError("data has " + std::to_string(ds.dim) +
                      " columns but the checkpoint expects " +
                      std::to_string(ck.dim));
    }
    rows = ds.points;
  }
  Eigen::VectorXd lp = model.logProbBatch(rows);
  std::string text = "log_prob\n";
  for (Eigen::Index i = 0; i < lp.size(); ++i) text += fmt(lp[i]) + "\n";
  writeTextFile(out, text);
  double nll = 0;
  for (Eigen::Index i = 0; i < lp.size(); ++i) nll += -lp[i];
  nll /= static_cast<double>(lp.size());
  std::printf("wrote %ld rows to %s\n", static_cast<long>(lp.size()),
              out.c_str());
  std::printf("mean nll: %.6f\n", nll);
  return 0;
}

int runCheck(const std::string& ckPath, std::uint64_t seed) {
  Checkpoint ck = Checkpoint::load(ckPath);
  Chain chain = ck.instantiateChain();
  const Index dim = ck.dim;
  const Index probes = 100;

  CounterRng rng(seed);
  Tensor z = Tensor::zeros({probes, dim});
  for (Index i = 0; i < z.size(); ++i) z.at(i) = rng.nextNormal();
  Tensor x = chain.inverseBatch(z).y;

  EagerStep fwd = chain.forwardBatch(x);
  EagerStep inv = chain.inverseBatch(fwd.y);

  double maxRt = 0, maxLd = 0;
  for (Index r = 0; r < probes; ++r) {
    for (Index c = 0; c < dim; ++c) {
      maxRt = std::max(maxRt, std::abs(inv.y.at(r, c) - x.at(r, c)));
    }
    maxLd = std::max(maxLd, std::abs(fwd.logDet.at(r) + inv.logDet.at(r)));
  }

  const double h = 1e-5;
  double maxRel = 0;
  for (Index r = 0; r < probes; ++r) {
    Tensor probe = Tensor::zeros({2 * dim, dim});
    for (Index j = 0; j < dim; ++j) {
      for (Index c = 0; c < dim; ++c) {
        probe.at(2 * j, c) = x.at(r, c);
        probe.at(2 * j + 1, c) = x.at(r, c);
      }
      probe.at(2 * j, j) += h;
      probe.at(2 * j + 1, j) -= h;
    }
    Tensor fy = chain.forwardBatch(probe).y;
    Eigen::MatrixXd jac(dim, dim);
    for (Index i = 0; i < dim; ++i) {
      for (Index j = 0; j < dim; ++j) {
        jac(i, j) = (fy.at(2 * j, i) - fy.at(2 * j + 1, i)) / (2 * h);
      }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    const double fd = lu.matrixLU().diagonal().array().abs().log().sum();
    const double ad = fwd.logDet.at(r);
    maxRel = std::max(maxRel, std::abs(ad - fd) / std::max(1.0, std::abs(fd)));
  }

  const bool rtOk = maxRt < 1e-9;
  const bool ldOk = maxLd < 1e-9;
  const bool fdOk = maxRel < 1e-4;
  std::printf("probes: %ld  dim: %ld\n", static_cast<long>(probes),
              static_cast<long>(dim));
  std::printf("round-trip max |x - inv(fwd(x))| = %.3g  (tol 1e-9)  %s\n",
              maxRt, rtOk ? "PASS" : "FAIL");
  std::printf("log-det consistency max |fwd + inv| = %.3g  (tol 1e-9)  %s\n",
              maxLd, ldOk ? "PASS" : "FAIL");
  std::printf("finite-difference log-det max rel err = %.3g  (tol 1e-4)  %s\n",
              maxRel, fdOk ? "PASS" : "FAIL");
  return (rtOk && ldOk && fdOk) ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"normalizing-flow density estimation toolkit"};
  app.require_subcommand(1);
  int rc = 0;

  auto* dt = app.add_subcommand(
      "demo-transforms",
      "run the 2-d benchmark pipeline and dump each stage as CSV");
  Index dtCount = 5000;
  std::uint64_t dtSeed = 42;
  std::string dtOut = ".";
  dt->add_option("--count", dtCount, "points to draw")
      ->check(CLI::PositiveNumber);
  dt->add_option("--seed", dtSeed, "rng seed");
  dt->add_option("--out", dtOut, "output directory");
  dt->callback([&] { rc = runDemoTransforms(dtCount, dtSeed, dtOut); });

  auto* dd = app.add_subcommand(
      "demo-disc", "tabulate the disc-area density against its closed form");
  std::string ddOut = "disc.csv";
  dd->add_option("--out", ddOut, "output CSV file");
  dd->callback([&] { rc = runDemoDisc(ddOut); });

  auto* dc = app.add_subcommand(
      "demo-coin", "print a coin-flip likelihood grid and its argmax");
  Index dcSuccesses = 2, dcTrials = 4;
  double dcGrid = 0.1;
  dc->add_option("--successes", dcSuccesses, "observed heads")
      ->check(CLI::NonNegativeNumber);
  dc->add_option("--trials", dcTrials, "total flips")
      ->check(CLI::PositiveNumber);
  dc->add_option("--grid", dcGrid, "grid spacing in (0,1)");
  dc->callback([&] { rc = runDemoCoin(dcSuccesses, dcTrials, dcGrid); });

  auto* tr = app.add_subcommand("train", "fit a flow to a dataset");
  TrainFlags tf;
  tr->add_option("--data", tf.data,
                 "CSV file, or a directory of .pgm files with --image")
      ->required();
  tr->add_flag("--image", tf.image, "treat --data as a directory of images");
  tr->add_option("--couplings", tf.couplings, "coupling layer count")
      ->check(CLI::PositiveNumber);
  tr->add_option("--hidden", tf.hidden, "conditioner hidden width")
      ->check(CLI::PositiveNumber);
  tr->add_flag("--lu-mixing", tf.luMixing,
               "append a learned linear mixing layer");
  tr->add_option("--lr", tf.lr, "Adam learning rate");
  tr->add_option("--clip", tf.clip, "per-tensor gradient norm clip");
  tr->add_option("--batch", tf.batch, "minibatch size")
      ->check(CLI::PositiveNumber);
  tr->add_option("--steps", tf.steps, "optimizer steps")
      ->check(CLI::NonNegativeNumber);
  tr->add_option("--seed", tf.seed, "rng seed");
  tr->add_option("--checkpoint-every", tf.ckEvery, "checkpoint interval")
      ->check(CLI::PositiveNumber);
  tr->add_option("--out", tf.out, "output directory")->required();
  tr->callback([&] { rc = runTrain(tf); });

  auto* sa = app.add_subcommand("sample", "draw samples from a checkpoint");
  std::string saCk, saOut;
  Index saCount = 100;
  std::uint64_t saSeed = 42;
  sa->add_option("--checkpoint", saCk, "checkpoint JSON")->required();
  sa->add_option("--count", saCount, "samples to draw")
      ->check(CLI::PositiveNumber);
  sa->add_option("--seed", saSeed, "rng seed");
  sa->add_option("--out", saOut,
                 "CSV file (tabular) or directory (image checkpoints)")
      ->required();
  sa->callback([&] { rc = runSample(saCk, saCount, saSeed, saOut); });

  auto* lp = app.add_subcommand("logprob",
                                "score a dataset under a checkpointed model");
  std::string lpCk, lpData, lpOut;
  std::uint64_t lpSeed = 0;
  lp->add_option("--checkpoint", lpCk, "checkpoint JSON")->required();
  lp->add_option("--data", lpData,
                 "CSV file, or a directory of .pgm files for image models")
      ->required();
  lp->add_option("--seed", lpSeed, "dequantization seed for image data");
  lp->add_option("--out", lpOut, "output CSV file")->required();
  lp->callback([&] { rc = runLogprob(lpCk, lpData, lpSeed, lpOut); });

  auto* chk = app.add_subcommand(
      "check", "audit a checkpoint's invertibility and log-det");
  std::string chkCk;
  std::uint64_t chkSeed = 42;
  chk->add_option("--checkpoint", chkCk, "checkpoint JSON")->required();
  chk->add_option("--seed", chkSeed, "probe seed");
  chk->callback([&] { rc = runCheck(chkCk, chkSeed); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return rc;
}
