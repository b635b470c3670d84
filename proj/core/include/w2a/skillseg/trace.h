#ifndef W2A_SKILLSEG_TRACE_H_
#define W2A_SKILLSEG_TRACE_H_

#include <vector>

namespace w2a::skillseg {

// Gripper width over low-level steps. `w0` is the calibrated fully open
// width; the closure signal is w0 - w_t.
struct GripperTrace {
  double w0 = 0.0;
  std::vector<double> widths;

  friend bool operator==(const GripperTrace&, const GripperTrace&) = default;
};

}  // namespace w2a::skillseg

#endif  // W2A_SKILLSEG_TRACE_H_
