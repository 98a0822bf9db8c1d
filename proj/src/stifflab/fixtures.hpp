#pragma once

#include <string>
#include <vector>

#include "stifflab/ode.hpp"

namespace stifflab {

/// A named reference system with a default checking window and a trajectory
/// setup for functional audits.
struct Fixture {
  std::string name;
  std::string description;
  SystemSpec system;
  double window_end;  // certificate grid runs over [t0, window_end]
  State ic;
  double audit_end;   // trajectory horizon for functional audits
};

const std::vector<Fixture>& builtin_fixtures();
const Fixture& find_fixture(const std::string& name);

}  // namespace stifflab
