#pragma once

#include <stdexcept>
#include <string>

namespace motionlab {

// Failure categories surfaced through the C API and the CLI exit line.
enum class ErrCat {
    config,
    shape,
    domain,
    contract,
    input,
    io,
    corrupt,
    version,
    training,
    sampling,
    render,
    prompt_template,
    integrity,
    data,
    partial,
    internal,
};

inline const char* errcat_name(ErrCat c) {
    switch (c) {
        case ErrCat::config: return "config";
        case ErrCat::shape: return "shape";
        case ErrCat::domain: return "domain";
        case ErrCat::contract: return "contract";
        case ErrCat::input: return "input";
        case ErrCat::io: return "io";
        case ErrCat::corrupt: return "corrupt";
        case ErrCat::version: return "version";
        case ErrCat::training: return "training";
        case ErrCat::sampling: return "sampling";
        case ErrCat::render: return "render";
        case ErrCat::prompt_template: return "template";
        case ErrCat::integrity: return "integrity";
        case ErrCat::data: return "data";
        case ErrCat::partial: return "partial";
        case ErrCat::internal: return "internal";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrCat cat, const std::string& msg)
        : std::runtime_error(std::string(errcat_name(cat)) + ": " + msg), cat_(cat) {}

    ErrCat category() const { return cat_; }

private:
    ErrCat cat_;
};

[[noreturn]] inline void fail(ErrCat cat, const std::string& msg) {
    throw Error(cat, msg);
}

inline void require(bool cond, ErrCat cat, const std::string& msg) {
    if (!cond) fail(cat, msg);
}

}  // namespace motionlab
