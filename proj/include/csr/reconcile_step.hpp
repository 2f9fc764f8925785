// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace csr {

/// Result of one background step.
struct ReconcileStep {
  enum class Status {
    Idle,       // nothing to do
    Prefilled,  // a prefill was issued on the secondary; call again at `wake_at`
    Retry,      // the prefill failed; call again at `wake_at`
    Done,       // reconciliation finished (scheduler: swapped; router: swap authorized)
  };
  Status status = Status::Idle;
  double wake_at = 0.0;
};

}  // namespace csr
