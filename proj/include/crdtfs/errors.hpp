#pragma once

#include <stdexcept>
#include <string>

namespace crdtfs {

/// Base class for all errors raised by the library.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed textual input (paths, scenarios, op literals).
struct parse_error : error {
    parse_error(const std::string& what, std::size_t position)
        : error(what + " (at position " + std::to_string(position) + ")"), pos(position) {}
    std::size_t pos;
};

/// A local operation was rejected because a precondition does not hold.
/// The message names the violated clause.
struct precondition_error : error {
    using error::error;
};

/// A path or element was looked up but is not present.
struct not_found_error : error {
    using error::error;
};

/// A view path matches more than one node; callers must disambiguate by origin.
struct ambiguity_error : error {
    using error::error;
};

/// A delivery contract was broken (duplicate delivery, causality violation).
/// Indicates a harness bug, never a user mistake.
struct contract_error : error {
    using error::error;
};

/// An invalid configuration combination was requested.
struct config_error : error {
    using error::error;
};

}  // namespace crdtfs
