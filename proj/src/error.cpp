#include "quap/error.hpp"

namespace quap {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Shape: return "shape";
        case ErrorKind::Index: return "index";
        case ErrorKind::Domain: return "domain";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::Input: return "input";
        case ErrorKind::Format: return "format";
        case ErrorKind::Config: return "config";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

}  // namespace quap
