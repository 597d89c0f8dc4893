#include <doctest.h>

#include "service_contract.hpp"

using namespace timecsl::testing;

TEST_CASE("service endpoint examples against a live instance") {
  for (const auto& c : run_service_contract()) {
    INFO(c.name << ": " << c.detail);
    CHECK(c.ok);
  }
}

TEST_CASE("service refuses a busy port") {
  LiveService first(service_fixture_dataset(), service_fixture_model(), {});
  timecsl::ServiceOptions opts;
  opts.port = first.port();
  timecsl::Service second(service_fixture_dataset(), service_fixture_model(), opts);
  CHECK_THROWS_AS(second.bind(), timecsl::Error);
}
