#pragma once

#include <stdexcept>
#include <string>

namespace spazer {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- point cloud / scene ingestion ---
struct MalformedHeader : Error { using Error::Error; };
struct MissingProperty : Error { using Error::Error; };
struct TruncatedBody : Error { using Error::Error; };
struct DuplicateId : Error { using Error::Error; };
struct NonPositiveSize : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };
struct MissingIntrinsics : Error { using Error::Error; };
struct NonInvertiblePose : Error { using Error::Error; };
struct DepthSizeMismatch : Error { using Error::Error; };
struct EmptyCloud : Error { using Error::Error; };

// --- projection / keyframes ---
struct NoVisibleFrame : Error { using Error::Error; };
struct EmptyCrops : Error { using Error::Error; };

// --- VLM client ---
struct TransportError : Error { using Error::Error; };
struct ScriptExhausted : Error { using Error::Error; };
struct MissingCredential : Error { using Error::Error; };
struct NoJsonFound : Error { using Error::Error; };
struct UnbalancedBraces : Error { using Error::Error; };

// --- pipeline / eval / synth ---
struct EmptyDetections : Error { using Error::Error; };
struct EmptyRecords : Error { using Error::Error; };
struct OverlappingObjects : Error { using Error::Error; };

}  // namespace spazer
