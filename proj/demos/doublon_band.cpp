// Doublon band of a periodic emitter array, printed next to the gap it sits in.
#include <cstdio>

#include "qpbs/array_pair.hpp"

int main() {
  const auto s = qpbs::array_spectrum(1.0, 1, {0.0, 2.0}, 16);
  const auto b = qpbs::doublon_band(s);
  std::printf("%10s %12s %12s %12s\n", "q", "gap lo", "E_D(q)", "gap hi");
  for (std::size_t m = 0; m < b.momenta.size(); ++m) {
    if (b.energies[m])
      std::printf("%10.4f %12.6f %12.6f %12.6f\n", b.momenta[m], b.windows[m].lo, *b.energies[m], b.windows[m].hi);
    else
      std::printf("%10.4f %12s\n", b.momenta[m], "ABSENT");
  }
  if (b.hoppings) std::printf("t1 = %.6f  t2 = %.6f\n", b.hoppings->at(1), b.hoppings->at(2));
}
