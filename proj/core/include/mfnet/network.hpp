#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mfnet {

/// Customer class. Stored zero-based; `label()` is the one-based name used in
/// files and reports.
struct ClassId {
  std::uint16_t index = 0;

  static constexpr ClassId from_label(int label) {
    return ClassId{static_cast<std::uint16_t>(label - 1)};
  }
  constexpr int label() const { return static_cast<int>(index) + 1; }

  friend constexpr bool operator==(ClassId, ClassId) = default;
  friend constexpr auto operator<=>(ClassId, ClassId) = default;
};

/// Content of one queue: customer classes ordered by arrival, oldest first.
class QueueWord {
 public:
  QueueWord() = default;
  explicit QueueWord(std::vector<ClassId> entries) : entries_(std::move(entries)) {}
  /// One-based class labels, e.g. {1, 2, 1}.
  QueueWord(std::initializer_list<int> labels);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  ClassId operator[](std::size_t pos) const { return entries_[pos]; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::span<const ClassId> entries() const { return entries_; }

  /// Digit string of one-based labels ("-" for the empty word). Labels are
  /// dot separated when the alphabet has more than nine classes.
  std::string to_string(int num_classes = 9) const;
  static QueueWord parse(std::string_view text);

  friend bool operator==(const QueueWord&, const QueueWord&) = default;
  friend auto operator<=>(const QueueWord&, const QueueWord&) = default;

 private:
  std::vector<ClassId> entries_;
};

/// x ⊕ j: class j joins the tail.
QueueWord apply_arrival(const QueueWord& x, ClassId j);
/// x ⊖ r: removes the customer at zero-based position r.
QueueWord apply_service(const QueueWord& x, std::size_t position);

/// Dense row-major substochastic matrix; at(i, j) is the probability that a
/// class i customer becomes class j after service.
class RoutingMatrix {
 public:
  RoutingMatrix() = default;
  explicit RoutingMatrix(int n) : n_(n), p_(static_cast<std::size_t>(n) * n, 0.0) {}
  RoutingMatrix(int n, std::vector<double> row_major);

  int size() const { return n_; }
  double at(int i, int j) const { return p_[static_cast<std::size_t>(i) * n_ + j]; }
  double& at(int i, int j) { return p_[static_cast<std::size_t>(i) * n_ + j]; }
  double row_sum(int i) const;
  double leave_probability(int i) const { return 1.0 - row_sum(i); }
  std::span<const double> data() const { return p_; }

 private:
  int n_ = 0;
  std::vector<double> p_;
};

enum class DisciplineKind { Fifo, LifoPreemptive, ProcessorSharing };

std::string_view to_string(DisciplineKind kind);
std::optional<DisciplineKind> parse_discipline(std::string_view name);

struct DisciplineSpec {
  DisciplineKind kind = DisciplineKind::Fifo;
  std::vector<double> base_rate;  // per class, per unit time
};

/// Rates γ(x, x_r) by zero-based position. Throws EmptyQueue for ∅.
std::vector<double> service_rate_profile(const QueueWord& x, const DisciplineSpec& d);
/// γ(x) = Σ_r γ(x, x_r); zero for the empty word.
double total_service_rate(const QueueWord& x, const DisciplineSpec& d);

/// Piecewise-constant external arrival rates. The first breakpoint is at t = 0
/// and each breakpoint holds until the next one.
class LambdaSchedule {
 public:
  struct Breakpoint {
    double time = 0.0;
    std::vector<double> rates;
  };

  LambdaSchedule() = default;
  explicit LambdaSchedule(std::vector<double> constant_rates);
  explicit LambdaSchedule(std::vector<Breakpoint> breakpoints);

  std::span<const double> rates_at(double t) const;
  std::span<const Breakpoint> breakpoints() const { return breakpoints_; }
  bool is_constant() const { return breakpoints_.size() == 1; }
  double max_rate() const;
  /// First breakpoint time strictly after t, or +inf.
  double next_change_after(double t) const;

 private:
  std::vector<Breakpoint> breakpoints_;
};

struct NetworkSpec {
  int num_classes = 0;
  std::vector<int> node_of_class;  // node label per class; informational
  RoutingMatrix routing;
  LambdaSchedule lambda;
  DisciplineSpec discipline;
  std::optional<double> gamma_minus;
  std::optional<double> gamma_plus;
  std::optional<double> lambda_plus;
  int truncation_K = 8;
};

struct RemainingServices {
  std::vector<double> h;  // h(j), expected number of services still ahead of a class j customer
  double h_max = 0.0;
};

/// h = (I - P)^{-1} 1.
RemainingServices expected_remaining_services(const RoutingMatrix& routing);

/// Spectral radius of a nonnegative matrix by power iteration.
double spectral_radius(const RoutingMatrix& routing);

/// L(x) = Σ_i h(x_i).
double queue_weight(const QueueWord& x, std::span<const double> h);

/// Immutable network that passed validate_spec.
class ValidatedNetwork {
 public:
  const NetworkSpec& spec() const { return spec_; }
  int num_classes() const { return spec_.num_classes; }
  const RoutingMatrix& routing() const { return spec_.routing; }
  const DisciplineSpec& discipline() const { return spec_.discipline; }
  const LambdaSchedule& lambda() const { return spec_.lambda; }
  std::span<const double> lambda_at(double t) const { return spec_.lambda.rates_at(t); }

  double gamma_minus() const { return gamma_minus_; }
  double gamma_plus() const { return gamma_plus_; }
  double lambda_plus() const { return lambda_plus_; }
  /// Uniform bound V on the total inflow per class.
  double inflow_bound() const { return lambda_plus_ + gamma_plus_; }
  double spectral_radius() const { return spectral_radius_; }
  const RemainingServices& remaining_services() const { return h_; }

 private:
  friend ValidatedNetwork validate_spec(NetworkSpec spec);
  ValidatedNetwork() = default;

  NetworkSpec spec_;
  double gamma_minus_ = 0.0;
  double gamma_plus_ = 0.0;
  double lambda_plus_ = 0.0;
  double spectral_radius_ = 0.0;
  RemainingServices h_;
};

/// Checks shapes, substochastic rows, ρ(P) < 1, and the rate conditions
/// λ_j(t) ≤ λ₊ and γ₋ ≤ γ(x) ≤ γ₊ over all words up to truncation_K.
/// Missing bounds are filled from the data.
ValidatedNetwork validate_spec(NetworkSpec spec);

inline constexpr std::size_t kDefaultWordBudget = std::size_t{1} << 22;

/// Number of words of length ≤ K over |J| letters, or nullopt past `limit`.
std::optional<std::size_t> word_count(int num_classes, int K, std::size_t limit = kDefaultWordBudget);

/// All words of length ≤ K in canonical order: by length, then lexicographic.
std::vector<QueueWord> enumerate_words(int num_classes, int K,
                                       std::size_t max_words = kDefaultWordBudget);

/// Truncated word space X_K with precomputed transition tables. Word indices
/// follow the canonical order of enumerate_words, so index 0 is ∅.
class WordSpace {
 public:
  struct Service {
    std::uint32_t target;  // index of x ⊖ r
    ClassId cls;           // x_r
    double rate;           // γ(x, x_r)
  };

  static constexpr std::uint32_t kOutside = 0xffffffffu;

  WordSpace(int num_classes, int K, const DisciplineSpec& discipline,
            std::size_t max_words = kDefaultWordBudget);

  int num_classes() const { return num_classes_; }
  int K() const { return K_; }
  std::size_t size() const { return words_.size(); }
  const QueueWord& word(std::size_t idx) const { return words_[idx]; }
  std::size_t length(std::size_t idx) const { return words_[idx].size(); }
  /// Index of a word, or nullopt if longer than K.
  std::optional<std::size_t> index_of(const QueueWord& x) const;

  /// Index of x ⊕ j, or kOutside when |x| = K.
  std::uint32_t arrival_target(std::size_t idx, int j) const {
    return arrival_[idx * num_classes_ + j];
  }
  /// Service events with nonzero rate out of word idx.
  std::span<const Service> services(std::size_t idx) const {
    return {services_.data() + service_offset_[idx],
            services_.data() + service_offset_[idx + 1]};
  }
  double total_rate(std::size_t idx) const { return total_rate_[idx]; }

 private:
  int num_classes_;
  int K_;
  std::vector<QueueWord> words_;
  std::vector<std::uint32_t> arrival_;
  std::vector<std::size_t> service_offset_;
  std::vector<Service> services_;
  std::vector<double> total_rate_;
};

}  // namespace mfnet
