#ifndef W2A_PIPELINE_PLOT_H_
#define W2A_PIPELINE_PLOT_H_

#include <string>

#include "w2a/pipeline/metrics.h"

namespace w2a::pipeline {

// One SVG with a panel per metric column, each holding exactly one polyline
// against the first column. Rows missing a value are skipped in that panel.
std::string RenderSvg(const MetricTable& table);

}  // namespace w2a::pipeline

#endif  // W2A_PIPELINE_PLOT_H_
