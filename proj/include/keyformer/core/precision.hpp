#pragma once

// Scalar type selection. The default build trains in 32-bit floats; defining
// KEYFORMER_DOUBLE_PRECISION switches every tensor to 64-bit for gradient
// checking. The two variants live in distinct inline namespaces so both can be
// linked into one binary.

#ifdef KEYFORMER_DOUBLE_PRECISION
#define KEYFORMER_PRECISION_NS f64
#else
#define KEYFORMER_PRECISION_NS f32
#endif

#define KEYFORMER_BEGIN_NAMESPACE \
  namespace keyformer {           \
  inline namespace KEYFORMER_PRECISION_NS {
#define KEYFORMER_END_NAMESPACE \
  }                             \
  }

KEYFORMER_BEGIN_NAMESPACE

#ifdef KEYFORMER_DOUBLE_PRECISION
using Real = double;
inline constexpr bool kDoublePrecision = true;
#else
using Real = float;
inline constexpr bool kDoublePrecision = false;
#endif

KEYFORMER_END_NAMESPACE
