#pragma once

// Constants for the single-precision GELU kernels. Both implementations
// evaluate the same expressions in the same order, so they agree bitwise.
// erf uses the rational approximation with |error| < 1.5e-7; exp uses a
// Cephes-style range reduction and degree-5 polynomial.

namespace unisync::simd::gelu_poly {

inline constexpr float kExpHi = 88.0f;
inline constexpr float kExpLo = -87.0f;
inline constexpr float kLog2e = 1.44269504088896341f;
inline constexpr float kLn2Hi = 0.693359375f;
inline constexpr float kLn2Lo = -2.12194440e-4f;
inline constexpr float kP0 = 1.9875691500e-4f;
inline constexpr float kP1 = 1.3981999507e-3f;
inline constexpr float kP2 = 8.3334519073e-3f;
inline constexpr float kP3 = 4.1665795894e-2f;
inline constexpr float kP4 = 1.6666665459e-1f;
inline constexpr float kP5 = 5.0000001201e-1f;

inline constexpr float kErfP = 0.3275911f;
inline constexpr float kA1 = 0.254829592f;
inline constexpr float kA2 = -0.284496736f;
inline constexpr float kA3 = 1.421413741f;
inline constexpr float kA4 = -1.453152027f;
inline constexpr float kA5 = 1.061405429f;

inline constexpr float kInvSqrt2 = 0.70710678118654752f;
inline constexpr float kInvSqrt2Pi = 0.39894228040143268f;

}  // namespace unisync::simd::gelu_poly
