#include "spec_file.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mfnet/error.hpp"

namespace mfnet::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where + ": expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where + ": expected an integer");
  return j.get<int>();
}

std::vector<double> numbers(const json& j, const std::string& where, std::size_t expected) {
  if (!j.is_array()) fail(where + ": expected an array");
  if (j.size() != expected) {
    fail(where + ": expected " + std::to_string(expected) + " entries, got " + std::to_string(j.size()));
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

const json& required(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end()) fail(std::string("missing field '") + key + "'");
  return *it;
}

std::optional<double> optional_number(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return std::nullopt;
  return number(*it, key);
}

LambdaSchedule parse_lambda(const json& j, std::size_t n) {
  if (!j.is_array() || j.empty()) fail("lambda: expected a non-empty array");
  if (!j.front().is_array()) return LambdaSchedule(numbers(j, "lambda", n));
  std::vector<LambdaSchedule::Breakpoint> bps;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string where = "lambda[" + std::to_string(k) + "]";
    const json& bp = j[k];
    if (!bp.is_array() || bp.size() != 2) fail(where + ": expected [time, [rates...]]");
    bps.push_back({number(bp[0], where + "[0]"), numbers(bp[1], where + "[1]", n)});
  }
  try {
    return LambdaSchedule(std::move(bps));
  } catch (const Error& e) {
    fail("lambda: " + e.detail());
  }
}

}  // namespace

NetworkSpec parse_spec(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail(e.what());
  }
  if (!doc.is_object()) fail("top level must be an object");

  NetworkSpec s;
  s.num_classes = integer(required(doc, "classes"), "classes");
  if (s.num_classes < 1 || s.num_classes > 65535) fail("classes: must be between 1 and 65535");
  const auto n = static_cast<std::size_t>(s.num_classes);

  if (const auto it = doc.find("nodes"); it != doc.end()) {
    const auto nodes = numbers(*it, "nodes", n);
    for (double v : nodes) s.node_of_class.push_back(static_cast<int>(v));
  } else {
    for (int j = 1; j <= s.num_classes; ++j) s.node_of_class.push_back(j);
  }

  const json& routing = required(doc, "routing");
  if (!routing.is_array() || routing.size() != n) fail("routing: expected " + std::to_string(n) + " rows");
  std::vector<double> flat;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = numbers(routing[i], "routing[" + std::to_string(i) + "]", n);
    flat.insert(flat.end(), row.begin(), row.end());
  }
  s.routing = RoutingMatrix(s.num_classes, std::move(flat));

  s.lambda = parse_lambda(required(doc, "lambda"), n);

  const json& disc = required(doc, "discipline");
  if (!disc.is_string()) fail("discipline: expected a string");
  const auto kind = parse_discipline(disc.get<std::string>());
  if (!kind) fail("discipline: unknown '" + disc.get<std::string>() + "' (fifo, lifo, ps)");
  s.discipline.kind = *kind;

  const json& rate = required(doc, "base_rate");
  if (rate.is_number()) {
    s.discipline.base_rate.assign(n, rate.get<double>());
  } else {
    s.discipline.base_rate = numbers(rate, "base_rate", n);
  }

  if (const auto it = doc.find("truncation_K"); it != doc.end()) s.truncation_K = integer(*it, "truncation_K");
  s.gamma_minus = optional_number(doc, "gamma_minus");
  s.gamma_plus = optional_number(doc, "gamma_plus");
  s.lambda_plus = optional_number(doc, "lambda_plus");
  return s;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

LoadedSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  try {
    return LoadedSpec{parse_spec(bytes), fnv1a_hex(bytes)};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) fail(path.string() + ": " + e.detail());
    throw;
  }
}

}  // namespace mfnet::cli
