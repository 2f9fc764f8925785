// SPDX-License-Identifier: Apache-2.0
// Appending chunks keeps the cached prefix valid; editing history does not.

#include <iostream>

#include "csr/csr.hpp"

int main() {
  using namespace csr;
  VirtualClock clock;
  MockBackend backend(HardwareProfile{}.with_kappa(2e-9), clock);

  sim::TokenSource src(7, 50000);
  CsrContext ctx(src.draw(2000));
  const TokenSeq task = src.draw(32);
  for (std::uint64_t id = 1; id <= 400; ++id) ctx = append_chunk(std::move(ctx), {src.draw(100), id, 0.0});

  auto show = [&](const char* what, const TokenSeq& seq) {
    const auto r = backend.prefill(ResourceId::R1, seq);
    std::cout << what << ": len=" << seq.size() << " i*=" << *r.i_star << " units=" << r.charged_units
              << " ttft=" << r.ttft << "s\n";
  };

  show("cold", assemble_with(ctx, src.draw(32), task));
  ctx = append_chunk(std::move(ctx), {src.draw(100), 401, 1.0});
  show("append", assemble_with(ctx, src.draw(32), task));

  // Rewriting an early token invalidates everything after it.
  TokenSeq mutated = assemble_with(ctx, src.draw(32), task);
  mutated[2500] ^= 1;
  show("mutate@2501", mutated);
}
