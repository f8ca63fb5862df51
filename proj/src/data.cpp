#include "nf/data.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>
#include <utility>
#include <vector>

#include "nf/density.hpp"

namespace nf {

namespace {

std::vector<std::string> splitCommas(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

void stripCr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

Chain crescentChain() {
  Eigen::Matrix2d stretch;
  stretch << 10.0, 0.0, 0.0, 1.0;
  const double angle = 75.0 * M_PI / 180.0;
  Eigen::Matrix2d rot;
  rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  Chain chain;
  chain.append(
      std::make_unique<Inverted>(std::make_unique<NonlinearShear2D>(40.0)));
  chain.append(std::make_unique<Inverted>(std::make_unique<FixedLinear>(rot)));
  chain.append(
      std::make_unique<Inverted>(std::make_unique<FixedLinear>(stretch)));
  return chain;
}

Dataset genCrescentDataset(Index count, std::uint64_t seed) {
  if (count < 1) throw DomainError("crescent: count must be positive");
  FlowModel model(std::make_unique<DiagonalStandardNormal>(2), crescentChain());
  Dataset ds;
  ds.dim = 2;
  ds.points = model.sample(count, seed);
  ds.source = "crescent(count=" + std::to_string(count) +
                  ", seed=" + std::to_string(seed) + ")";
  return ds;
}

void writeCsv(const Dataset& ds, const std::string& path) {
  if (ds.dim < 1 || ds.points.rank() != 2 || ds.points.cols() != ds.dim) {
    throw ShapeError("csv: dataset dim and points disagree");
  }
  if (!ds.points.data().isFinite().all()) {
    throw DataError("csv: dataset holds non-finite values");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("csv: cannot open " + path + " for writing");
  for (Index c = 0; c < ds.dim; ++c) {
    out << (c ? "," : "") << 'x' << c + 1;
  }
  out << '\n';
  char buf[40];
  for (Index r = 0; r < ds.points.rows(); ++r) {
    for (Index c = 0; c < ds.dim; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.points.at(r, c));
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("csv: write to " + path + " failed");
}

Dataset loadCsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("csv: " + path + " is empty");
  stripCr(line);

  const std::vector<std::string> head = splitCommas(line);
  const Index dim = static_cast<Index>(head.size());
  for (Index c = 0; c < dim; ++c) {
    if (head[c] != "x" + std::to_string(c + 1)) {
      throw DataError("csv: " + path + " line 1: expected header x1,...,x" +
                      std::to_string(dim) + ", got '" + head[c] + "'");
    }
  }

  std::vector<double> values;
  Index rows = 0;
  Index lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    stripCr(line);
    const std::vector<std::string> fields = splitCommas(line);
    if (static_cast<Index>(fields.size()) != dim) {
      throw DataError("csv: " + path + " line " + std::to_string(lineNo) +
                      ": expected " + std::to_string(dim) + " values, got " +
                      std::to_string(fields.size()));
    }
    for (const std::string& field : fields) {
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (end == field.c_str() || *end != '\0') {
        throw DataError("csv: " + path + " line " + std::to_string(lineNo) +
                        ": cannot parse '" + field + "' as a number");
      }
      if (!std::isfinite(v)) {
        throw DataError("csv: " + path + " line " + std::to_string(lineNo) +
                        ": non-finite value");
      }
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw DataError("csv: " + path + " has no data rows");

  Eigen::ArrayXd flat(static_cast<Index>(values.size()));
  for (size_t i = 0; i < values.size(); ++i) {
    flat[static_cast<Index>(i)] = values[i];
  }
  Dataset ds;
  ds.dim = dim;
  ds.points = Tensor::fromFlat({rows, dim}, std::move(flat));
  ds.source = path;
  return ds;
}

}  // namespace nf
