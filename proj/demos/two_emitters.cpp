// Two emitters on an infinite chain: bound states and the hopping between them
// as the coupling grows.
#include <cstdio>

#include "qpbs/single_excitation.hpp"

int main() {
  const auto bath = qpbs::BathSpec::infinite(1.0);
  std::printf("%8s %12s %12s %12s\n", "Omega", "E+", "E-", "t_eff");
  for (double om : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    const auto s = qpbs::solve_two_qe(bath, {-1.0, om}, 1);
    if (!s.exists_minus) {
      std::printf("%8.2f %12.6f %12s %12s\n", om, *s.e_plus, "none", "-");
      continue;
    }
    const auto h = qpbs::effective_hopping_two_qe(s);
    std::printf("%8.2f %12.6f %12.6f %12.6f\n", om, *s.e_plus, *s.e_minus, h.t);
  }
}
