#include "sfmg/feature_frame.hpp"

namespace sfmg {

Vec2 ObservationWindow::last_velocity() const {
    if (positions.size() < 2) return {};
    return (positions.back() - positions[positions.size() - 2]) / dt;
}

NormalizedWindow normalize_window(const std::vector<Vec2>& positions, int n) {
    if (n < 1 || static_cast<int>(positions.size()) != n) {
        throw UsageError("window must hold exactly " + std::to_string(n) + " positions, got " +
                         std::to_string(positions.size()));
    }
    NormalizedWindow out;
    out.offsets.reserve(positions.size());
    for (const auto& p : positions) out.offsets.push_back(p - positions.front());
    out.step_norms.reserve(positions.size() - 1);
    for (std::size_t k = 1; k < positions.size(); ++k) {
        out.step_norms.push_back(distance(out.offsets[k], out.offsets[k - 1]));
    }
    return out;
}

}  // namespace sfmg
