#pragma once

namespace tvp {

// x with erfc(x) = y for 0 < y < 2. Odd about y = 1: inv_erfc(2 - y) = -inv_erfc(y).
// Throws DomainError outside (0, 2).
[[nodiscard]] double inv_erfc(double y);

} // namespace tvp
