// Unit-filling ground state of a short emitter chain, once weakly and once
// strongly coupled, with the phase diagnostics.
#include <cstdio>

#include "qpbs/mps_ground_state.hpp"

int main() {
  qpbs::ChainSpec c;
  c.n_imp = 12;
  c.cap = 4;
  c.bond_max = 96;
  for (double om : {0.5, 10.0}) {
    qpbs::DmrgOptions o;
    o.throw_if_not_converged = false;
    const auto st = qpbs::ground_state(c, 1.0, {0.0, om}, o);
    const auto d = qpbs::diagnose(st);
    std::printf("Omega=%-5.1f E=%.8f sweeps=%d converged=%d  l1/l2=%.2f  S spread=%.3f  phase=%s\n", om, st.energy, st.sweeps,
                st.converged ? 1 : 0, d.dominant_ratio(), d.entropy.interior_spread, qpbs::to_string(d.phase));
  }
}
