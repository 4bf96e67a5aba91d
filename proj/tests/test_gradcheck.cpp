#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <vector>

#include "doctest.h"
#include "gradcheck_suite.hpp"
#include "ionread/nn.hpp"

using namespace ionread;

TEST_CASE("backward matches central differences on 30 random configurations") {
  for (const gradcheck::ConfigResult& r : gradcheck::run_suite(30)) {
    CAPTURE(r.config);
    REQUIRE_MESSAGE(r.batch_found, "no margin-clean batch found for config ", r.config);
    CHECK(r.analytic_loss == doctest::Approx(r.direct_loss).epsilon(1e-12));
    CHECK_MESSAGE(r.rel_error < gradcheck::kRelTol, "config ", r.config, " max relative error ",
                  r.rel_error);
  }
}

TEST_CASE("zero-loss batch yields all-zero gradients") {
  NetworkSpec spec = logistic_spec(3);
  Params p = init_params(spec, 9);
  const std::vector<double> x = {1.0, -0.5, 2.0};
  const std::vector<double> y = forward(spec, p, x);
  Params grads = zero_like(p);
  const double loss = l1_batch_gradient(spec, p, {x}, {y}, grads);
  CHECK(loss == 0.0);
  for (const auto& lp : grads) {
    for (double g : lp.weight.data) CHECK(g == 0.0);
    for (double g : lp.bias.data) CHECK(g == 0.0);
  }
}
