#pragma once

#include <cstdint>
#include <vector>

#include "mfnet/network.hpp"
#include "mfnet/rng.hpp"

namespace mfnet::testing {

/// Reference network: two classes, p12 = 0.5, p10 = 0.5, p20 = 1,
/// λ = (0.05, 0.05), FIFO with unit rates.
inline NetworkSpec e1_spec(int K = 8) {
  NetworkSpec s;
  s.num_classes = 2;
  s.node_of_class = {1, 2};
  s.routing = RoutingMatrix(2, {0.0, 0.5, 0.0, 0.0});
  s.lambda = LambdaSchedule(std::vector<double>{0.05, 0.05});
  s.discipline = DisciplineSpec{DisciplineKind::Fifo, {1.0, 1.0}};
  s.truncation_K = K;
  return s;
}

inline NetworkSpec single_class_spec(double lambda, int K = 8) {
  NetworkSpec s;
  s.num_classes = 1;
  s.routing = RoutingMatrix(1, {0.0});
  s.lambda = LambdaSchedule(std::vector<double>{lambda});
  s.discipline = DisciplineSpec{DisciplineKind::Fifo, {1.0}};
  s.truncation_K = K;
  return s;
}

inline NetworkSpec with_lambda(NetworkSpec s, std::vector<double> lambda) {
  s.lambda = LambdaSchedule(std::move(lambda));
  return s;
}

inline QueueWord random_word(Philox4x32& rng, int num_classes, int max_len) {
  const int len = static_cast<int>(rng.uniform01() * (max_len + 1));
  std::vector<ClassId> e;
  for (int i = 0; i < len; ++i) {
    e.push_back(ClassId{static_cast<std::uint16_t>(rng.uniform01() * num_classes)});
  }
  return QueueWord(std::move(e));
}

}  // namespace mfnet::testing
