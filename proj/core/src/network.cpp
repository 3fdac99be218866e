#include "mfnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "linalg.hpp"
#include "mfnet/error.hpp"

namespace mfnet {

QueueWord::QueueWord(std::initializer_list<int> labels) {
  entries_.reserve(labels.size());
  for (int l : labels) {
    if (l < 1) throw Error(ErrorCode::InvalidArgument, "class labels start at 1");
    entries_.push_back(ClassId::from_label(l));
  }
}

std::string QueueWord::to_string(int num_classes) const {
  if (entries_.empty()) return "-";
  std::string out;
  const bool dotted = num_classes > 9;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (dotted && i > 0) out += '.';
    out += std::to_string(entries_[i].label());
  }
  return out;
}

QueueWord QueueWord::parse(std::string_view text) {
  if (text == "-" || text.empty()) return {};
  std::vector<ClassId> entries;
  auto bad = [&] { return Error(ErrorCode::ParseError, "bad queue word '" + std::string(text) + "'"); };
  if (text.find('.') != std::string_view::npos) {
    std::size_t start = 0;
    while (start <= text.size()) {
      const std::size_t dot = std::min(text.find('.', start), text.size());
      const auto piece = text.substr(start, dot - start);
      if (piece.empty()) throw bad();
      int label = 0;
      for (char c : piece) {
        if (c < '0' || c > '9') throw bad();
        label = label * 10 + (c - '0');
      }
      if (label < 1) throw bad();
      entries.push_back(ClassId::from_label(label));
      start = dot + 1;
    }
  } else {
    for (char c : text) {
      if (c < '1' || c > '9') throw bad();
      entries.push_back(ClassId::from_label(c - '0'));
    }
  }
  return QueueWord(std::move(entries));
}

QueueWord apply_arrival(const QueueWord& x, ClassId j) {
  std::vector<ClassId> e(x.begin(), x.end());
  e.push_back(j);
  return QueueWord(std::move(e));
}

QueueWord apply_service(const QueueWord& x, std::size_t position) {
  if (position >= x.size()) {
    throw Error(ErrorCode::PositionOutOfRange,
                "position " + std::to_string(position + 1) + " in word of length " +
                    std::to_string(x.size()));
  }
  std::vector<ClassId> e(x.begin(), x.end());
  e.erase(e.begin() + static_cast<std::ptrdiff_t>(position));
  return QueueWord(std::move(e));
}

RoutingMatrix::RoutingMatrix(int n, std::vector<double> row_major) : n_(n), p_(std::move(row_major)) {
  if (n < 0 || p_.size() != static_cast<std::size_t>(n) * n) {
    throw Error(ErrorCode::InvalidArgument, "routing matrix must be " + std::to_string(n) + "x" +
                                                std::to_string(n));
  }
}

double RoutingMatrix::row_sum(int i) const {
  double s = 0.0;
  for (int j = 0; j < n_; ++j) s += at(i, j);
  return s;
}

std::string_view to_string(DisciplineKind kind) {
  switch (kind) {
    case DisciplineKind::Fifo: return "fifo";
    case DisciplineKind::LifoPreemptive: return "lifo";
    case DisciplineKind::ProcessorSharing: return "ps";
  }
  return "?";
}

std::optional<DisciplineKind> parse_discipline(std::string_view name) {
  if (name == "fifo" || name == "FIFO") return DisciplineKind::Fifo;
  if (name == "lifo" || name == "LIFO" || name == "lifo-preemptive") return DisciplineKind::LifoPreemptive;
  if (name == "ps" || name == "PS" || name == "processor-sharing") return DisciplineKind::ProcessorSharing;
  return std::nullopt;
}

std::vector<double> service_rate_profile(const QueueWord& x, const DisciplineSpec& d) {
  if (x.empty()) throw Error(ErrorCode::EmptyQueue, "service profile of the empty queue");
  std::vector<double> rates(x.size(), 0.0);
  switch (d.kind) {
    case DisciplineKind::Fifo:
      rates.front() = d.base_rate[x[0].index];
      break;
    case DisciplineKind::LifoPreemptive:
      rates.back() = d.base_rate[x[x.size() - 1].index];
      break;
    case DisciplineKind::ProcessorSharing: {
      const double share = 1.0 / static_cast<double>(x.size());
      for (std::size_t r = 0; r < x.size(); ++r) rates[r] = d.base_rate[x[r].index] * share;
      break;
    }
  }
  return rates;
}

double total_service_rate(const QueueWord& x, const DisciplineSpec& d) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double r : service_rate_profile(x, d)) s += r;
  return s;
}

LambdaSchedule::LambdaSchedule(std::vector<double> constant_rates)
    : breakpoints_{Breakpoint{0.0, std::move(constant_rates)}} {}

LambdaSchedule::LambdaSchedule(std::vector<Breakpoint> breakpoints)
    : breakpoints_(std::move(breakpoints)) {
  if (breakpoints_.empty()) throw Error(ErrorCode::InvalidArgument, "empty lambda schedule");
  if (breakpoints_.front().time != 0.0) {
    throw Error(ErrorCode::InvalidArgument, "lambda schedule must start at t = 0");
  }
  for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
    if (!(breakpoints_[i].time > breakpoints_[i - 1].time)) {
      throw Error(ErrorCode::InvalidArgument, "lambda breakpoints must be strictly increasing");
    }
  }
}

std::span<const double> LambdaSchedule::rates_at(double t) const {
  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t,
                             [](double v, const Breakpoint& b) { return v < b.time; });
  if (it != breakpoints_.begin()) --it;
  return it->rates;
}

double LambdaSchedule::max_rate() const {
  double m = 0.0;
  for (const auto& b : breakpoints_) {
    for (double r : b.rates) m = std::max(m, r);
  }
  return m;
}

double LambdaSchedule::next_change_after(double t) const {
  for (const auto& b : breakpoints_) {
    if (b.time > t) return b.time;
  }
  return std::numeric_limits<double>::infinity();
}

RemainingServices expected_remaining_services(const RoutingMatrix& routing) {
  const int n = routing.size();
  std::vector<double> a(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a[i * n + j] = (i == j ? 1.0 : 0.0) - routing.at(i, j);
  }
  RemainingServices out;
  out.h = detail::solve_dense(std::move(a), std::vector<double>(n, 1.0));
  out.h_max = n > 0 ? *std::max_element(out.h.begin(), out.h.end()) : 0.0;
  return out;
}

double spectral_radius(const RoutingMatrix& routing) {
  const int n = routing.size();
  if (n == 0) return 0.0;
  auto apply = [&](const std::vector<double>& x) {
    std::vector<double> y(n, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) y[i] += std::abs(routing.at(i, j)) * x[j];
    }
    return y;
  };
  // P^k 1 = 0 for some k ≤ n exactly when P is nilpotent.
  std::vector<double> x(n, 1.0);
  for (int k = 0; k < n; ++k) {
    x = apply(x);
    if (std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; })) return 0.0;
  }
  // Power iteration on |P| + I, which is aperiodic; the Collatz-Wielandt
  // ratios bracket ρ(|P|) + 1 at every iterate.
  x.assign(n, 1.0);
  double lower = 0.0;
  double upper = 0.0;
  for (int it = 0; it < 10'000; ++it) {
    std::vector<double> y = apply(x);
    lower = std::numeric_limits<double>::infinity();
    upper = 0.0;
    double norm = 0.0;
    for (int i = 0; i < n; ++i) {
      y[i] += x[i];
      const double ratio = y[i] / x[i];
      lower = std::min(lower, ratio);
      upper = std::max(upper, ratio);
      norm = std::max(norm, y[i]);
    }
    for (int i = 0; i < n; ++i) x[i] = y[i] / norm;
    if (upper - lower < 1e-12) break;
  }
  return 0.5 * (lower + upper) - 1.0;
}

double queue_weight(const QueueWord& x, std::span<const double> h) {
  double s = 0.0;
  for (ClassId c : x) s += h[c.index];
  return s;
}

namespace {

std::string class_name(int i) { return "class " + std::to_string(i + 1); }

}  // namespace

ValidatedNetwork validate_spec(NetworkSpec spec) {
  const int n = spec.num_classes;
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "at least one class is required");
  if (spec.routing.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "routing matrix size does not match class count");
  }
  if (spec.node_of_class.empty()) {
    for (int i = 0; i < n; ++i) spec.node_of_class.push_back(i + 1);
  } else if (static_cast<int>(spec.node_of_class.size()) != n) {
    throw Error(ErrorCode::InvalidArgument, "nodes must list one node per class");
  }
  if (static_cast<int>(spec.discipline.base_rate.size()) != n) {
    throw Error(ErrorCode::InvalidArgument, "base_rate must list one rate per class");
  }
  for (int i = 0; i < n; ++i) {
    if (!(spec.discipline.base_rate[i] > 0.0) || !std::isfinite(spec.discipline.base_rate[i])) {
      throw Error(ErrorCode::InvalidArgument, "base rate of " + class_name(i) + " must be positive");
    }
  }
  if (spec.lambda.breakpoints().empty()) {
    throw Error(ErrorCode::InvalidArgument, "external rates are missing");
  }
  for (const auto& b : spec.lambda.breakpoints()) {
    if (static_cast<int>(b.rates.size()) != n) {
      throw Error(ErrorCode::InvalidArgument, "lambda must list one rate per class");
    }
    for (double r : b.rates) {
      if (!(r >= 0.0) || !std::isfinite(r)) {
        throw Error(ErrorCode::InvalidArgument, "external rates must be nonnegative");
      }
    }
  }
  if (spec.truncation_K < 0) throw Error(ErrorCode::InvalidArgument, "truncation_K must be >= 0");

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (!(spec.routing.at(i, j) >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "negative routing probability in row " +
                                                    std::to_string(i + 1));
      }
    }
    const double s = spec.routing.row_sum(i);
    if (s > 1.0 + 1e-12) {
      std::ostringstream os;
      os << "row " << i + 1 << " sums to " << s;
      throw Error(ErrorCode::RowSumExceedsOne, os.str());
    }
  }

  ValidatedNetwork net;
  net.spectral_radius_ = spectral_radius(spec.routing);
  if (!(net.spectral_radius_ < 1.0 - 1e-12)) {
    std::ostringstream os;
    os << "rho(P) = " << net.spectral_radius_;
    throw Error(ErrorCode::SpectralRadiusNotSubcritical, os.str());
  }

  const double lambda_max = spec.lambda.max_rate();
  net.lambda_plus_ = spec.lambda_plus.value_or(lambda_max);
  for (const auto& b : spec.lambda.breakpoints()) {
    for (int j = 0; j < n; ++j) {
      if (b.rates[j] > net.lambda_plus_) {
        std::ostringstream os;
        os << "lambda of " << class_name(j) << " at t=" << b.time << " exceeds lambda_plus";
        throw Error(ErrorCode::RateConditionViolated, os.str());
      }
    }
  }

  // RC2 over every nonempty word up to the truncation depth.
  double gmin = std::numeric_limits<double>::infinity();
  double gmax = 0.0;
  const std::vector<QueueWord> words = enumerate_words(n, std::max(spec.truncation_K, 1));
  for (const QueueWord& x : words) {
    if (x.empty()) continue;
    const double g = total_service_rate(x, spec.discipline);
    gmin = std::min(gmin, g);
    gmax = std::max(gmax, g);
    if ((spec.gamma_minus && g < *spec.gamma_minus - 1e-12) ||
        (spec.gamma_plus && g > *spec.gamma_plus + 1e-12)) {
      std::ostringstream os;
      os << "gamma(" << x.to_string(n) << ") = " << g << " outside [gamma_minus, gamma_plus]";
      throw Error(ErrorCode::RateConditionViolated, os.str());
    }
  }
  net.gamma_minus_ = spec.gamma_minus.value_or(gmin);
  net.gamma_plus_ = spec.gamma_plus.value_or(gmax);
  if (!(net.gamma_minus_ > 0.0) || net.gamma_minus_ > net.gamma_plus_) {
    throw Error(ErrorCode::RateConditionViolated, "need 0 < gamma_minus <= gamma_plus");
  }

  net.h_ = expected_remaining_services(spec.routing);
  net.spec_ = std::move(spec);
  return net;
}

std::optional<std::size_t> word_count(int num_classes, int K, std::size_t limit) {
  std::size_t total = 0;
  std::size_t level = 1;
  for (int k = 0; k <= K; ++k) {
    total += level;
    if (total > limit) return std::nullopt;
    if (k < K) {
      if (level > limit / static_cast<std::size_t>(num_classes)) return std::nullopt;
      level *= static_cast<std::size_t>(num_classes);
    }
  }
  return total;
}

std::vector<QueueWord> enumerate_words(int num_classes, int K, std::size_t max_words) {
  if (num_classes < 1 || K < 0) {
    throw Error(ErrorCode::InvalidArgument, "need |J| >= 1 and K >= 0");
  }
  const auto count = word_count(num_classes, K, max_words);
  if (!count) {
    throw Error(ErrorCode::TruncationTooLarge,
                "|J|=" + std::to_string(num_classes) + ", K=" + std::to_string(K) +
                    " exceeds the word budget of " + std::to_string(max_words));
  }
  std::vector<QueueWord> words;
  words.reserve(*count);
  words.emplace_back();
  std::size_t level_begin = 0;
  for (int k = 1; k <= K; ++k) {
    const std::size_t level_end = words.size();
    for (std::size_t i = level_begin; i < level_end; ++i) {
      for (int j = 0; j < num_classes; ++j) {
        words.push_back(apply_arrival(words[i], ClassId{static_cast<std::uint16_t>(j)}));
      }
    }
    level_begin = level_end;
  }
  return words;
}

WordSpace::WordSpace(int num_classes, int K, const DisciplineSpec& discipline, std::size_t max_words)
    : num_classes_(num_classes), K_(K), words_(enumerate_words(num_classes, K, max_words)) {
  if (words_.size() >= kOutside) throw Error(ErrorCode::TruncationTooLarge, "index overflow");
  const std::size_t n = words_.size();
  arrival_.assign(n * num_classes_, kOutside);
  service_offset_.assign(n + 1, 0);
  total_rate_.assign(n, 0.0);
  for (std::size_t idx = 0; idx < n; ++idx) {
    const QueueWord& x = words_[idx];
    if (static_cast<int>(x.size()) < K_) {
      for (int j = 0; j < num_classes_; ++j) {
        arrival_[idx * num_classes_ + j] = static_cast<std::uint32_t>(
            *index_of(apply_arrival(x, ClassId{static_cast<std::uint16_t>(j)})));
      }
    }
    if (!x.empty()) {
      const auto rates = service_rate_profile(x, discipline);
      for (std::size_t r = 0; r < x.size(); ++r) {
        if (rates[r] == 0.0) continue;
        services_.push_back(Service{static_cast<std::uint32_t>(*index_of(apply_service(x, r))),
                                    x[r], rates[r]});
        total_rate_[idx] += rates[r];
      }
    }
    service_offset_[idx + 1] = services_.size();
  }
}

std::optional<std::size_t> WordSpace::index_of(const QueueWord& x) const {
  if (static_cast<int>(x.size()) > K_) return std::nullopt;
  // Offset of the length block plus the base-|J| value of the word.
  std::size_t offset = 0;
  std::size_t level = 1;
  for (std::size_t k = 0; k < x.size(); ++k) {
    offset += level;
    level *= static_cast<std::size_t>(num_classes_);
  }
  std::size_t value = 0;
  for (ClassId c : x) {
    if (c.index >= num_classes_) return std::nullopt;
    value = value * static_cast<std::size_t>(num_classes_) + c.index;
  }
  return offset + value;
}

}  // namespace mfnet
