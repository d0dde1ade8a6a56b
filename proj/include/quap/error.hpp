#pragma once

#include <stdexcept>
#include <string>

namespace quap {

// Every library failure derives from Error; the CLI maps the category to an
// exit code.
enum class ErrorKind {
    Shape,
    Index,
    Domain,
    Numeric,
    Input,
    Format,
    Config,
    Io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define QUAP_DEFINE_ERROR(Name, Kind)                                            \
    class Name : public Error {                                                  \
    public:                                                                      \
        explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
    }

QUAP_DEFINE_ERROR(ShapeError, Shape);
QUAP_DEFINE_ERROR(IndexError, Index);
QUAP_DEFINE_ERROR(DomainError, Domain);
QUAP_DEFINE_ERROR(NumericError, Numeric);
QUAP_DEFINE_ERROR(InputError, Input);
QUAP_DEFINE_ERROR(FormatError, Format);
QUAP_DEFINE_ERROR(ConfigError, Config);
QUAP_DEFINE_ERROR(IoError, Io);

#undef QUAP_DEFINE_ERROR

const char* to_string(ErrorKind kind) noexcept;

}  // namespace quap
