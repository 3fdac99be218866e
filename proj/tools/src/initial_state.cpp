#include "initial_state.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "mfnet/error.hpp"
#include "mfnet/rng.hpp"

namespace mfnet::cli {

namespace {

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

QueueWord word_in(std::string_view text, const WordSpace& space) {
  QueueWord x;
  try {
    x = QueueWord::parse(text);
  } catch (const Error& e) {
    fail("bad word '" + std::string(text) + "'");
  }
  for (ClassId c : x) {
    if (c.index >= space.num_classes()) fail("word '" + std::string(text) + "' uses an unknown class");
  }
  return x;
}

MeasureState geometric(double r, const WordSpace& space) {
  if (!(r >= 0.0 && r < 1.0)) fail("geometric ratio must lie in [0, 1)");
  MeasureState mu;
  mu.weights.assign(space.size(), 0.0);
  double total = 0.0;
  for (int k = 0; k <= space.K(); ++k) total += std::pow(r, k);
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto k = static_cast<int>(space.length(i));
    mu.weights[i] = std::pow(r, k) / total / std::pow(static_cast<double>(space.num_classes()), k);
  }
  return mu;
}

MeasureState from_csv(const std::string& path, const WordSpace& space) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path);
  MeasureState mu;
  mu.weights.assign(space.size(), 0.0);
  std::string line;
  int lineno = 0;
  double total = 0.0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto comma = s.find(',');
    if (comma == std::string_view::npos) fail(path + ":" + std::to_string(lineno) + ": expected word,weight");
    const auto word = trim(s.substr(0, comma));
    const std::string weight(trim(s.substr(comma + 1)));
    if (word == "word") continue;
    double w = 0.0;
    try {
      std::size_t used = 0;
      w = std::stod(weight, &used);
      if (used != weight.size()) throw std::invalid_argument(weight);
    } catch (const std::exception&) {
      fail(path + ":" + std::to_string(lineno) + ": bad weight '" + weight + "'");
    }
    if (!(w >= 0.0)) fail(path + ":" + std::to_string(lineno) + ": negative weight");
    const QueueWord x = word_in(word, space);
    const auto idx = space.index_of(x);
    if (!idx) throw Error(ErrorCode::TruncationMismatch, "word '" + std::string(word) + "' is longer than K");
    mu.weights[*idx] += w;
    total += w;
  }
  if (!(total > 0.0)) fail(path + ": no positive weight");
  for (double& w : mu.weights) w /= total;
  return mu;
}

}  // namespace

MeasureState initial_measure(std::string_view descriptor, const WordSpace& space) {
  if (descriptor == "empty") return MeasureState::empty_queue(space);
  const auto colon = descriptor.find(':');
  if (colon == std::string_view::npos) fail("unknown initial state '" + std::string(descriptor) + "'");
  const auto kind = descriptor.substr(0, colon);
  const std::string arg(descriptor.substr(colon + 1));
  if (kind == "word") return MeasureState::point_mass(space, word_in(arg, space));
  if (kind == "geometric") {
    try {
      return geometric(std::stod(arg), space);
    } catch (const std::invalid_argument&) {
      fail("bad geometric ratio '" + arg + "'");
    }
  }
  if (kind == "csv") return from_csv(arg, space);
  fail("unknown initial state '" + std::string(descriptor) + "'");
}

EnsembleState initial_ensemble(std::string_view descriptor, std::size_t M, const WordSpace& space,
                               std::uint64_t seed) {
  if (descriptor == "empty") return EnsembleState::empty(M);
  if (descriptor.starts_with("word:")) {
    return EnsembleState{std::vector<QueueWord>(M, word_in(descriptor.substr(5), space)), 0.0};
  }
  const MeasureState mu = initial_measure(descriptor, space);
  Philox4x32 rng(seed, 1);
  EnsembleState out;
  out.queues.reserve(M);
  for (std::size_t m = 0; m < M; ++m) {
    double u = rng.uniform01();
    std::size_t pick = 0;
    for (std::size_t i = 0; i < space.size(); ++i) {
      if (mu.weights[i] == 0.0) continue;
      pick = i;
      u -= mu.weights[i];
      if (u < 0.0) break;
    }
    out.queues.push_back(space.word(pick));
  }
  return out;
}

}  // namespace mfnet::cli
