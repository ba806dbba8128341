#ifndef MEMBRANE_VERSION_HPP
#define MEMBRANE_VERSION_HPP

namespace membrane {
inline constexpr const char* version = "0.1.0";
}

#endif  // MEMBRANE_VERSION_HPP
