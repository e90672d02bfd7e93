#include "qbal/test_functions.hpp"

#include <algorithm>
#include <cmath>

#include "qbal/errors.hpp"

namespace qbal {

namespace {

double total(std::span<const std::int32_t> x) {
  double s = 0.0;
  for (auto v : x) s += v;
  return s;
}

double capped(double v, double cap) { return std::min(v, cap); }

std::vector<TestFunction> build_library() {
  using X = std::span<const std::int32_t>;
  return {
      {"const", [](X) { return 1.0; }},
      {"nonempty", [](X x) { return total(x) >= 1.0 ? 1.0 : 0.0; }},
      {"min_x1_5", [](X x) { return capped(x[0], 5.0); }},
      {"min_total_10", [](X x) { return capped(total(x), 10.0); }},
      {"min_xm_5", [](X x) { return capped(x.back(), 5.0); }},
      {"x1_empty", [](X x) { return x[0] == 0 ? 1.0 : 0.0; }},
      {"min_x1_3_times_min_xm_3", [](X x) { return capped(x[0], 3.0) * capped(x.back(), 3.0); }},
      {"half_pow_total", [](X x) { return std::pow(0.5, total(x)); }},
      {"pow_075_x1", [](X x) { return std::pow(0.75, x[0]); }},
      {"pow_09_x1_pow_05_xm", [](X x) { return std::pow(0.9, x[0]) * std::pow(0.5, x.back()); }},
      {"total_at_least_3", [](X x) { return total(x) >= 3.0 ? 1.0 : 0.0; }},
      {"max_min_xi_8",
       [](X x) {
         double best = 0.0;
         for (auto v : x) best = std::max(best, capped(v, 8.0));
         return best;
       }},
  };
}

}  // namespace

const std::vector<TestFunction>& test_function_library() {
  static const std::vector<TestFunction> library = build_library();
  return library;
}

const TestFunction& test_function(const std::string& name) {
  for (const auto& f : test_function_library()) {
    if (f.name == name) return f;
  }
  throw InvalidParameter("unknown test function '" + name + "'");
}

}  // namespace qbal
