#pragma once

#include <stdexcept>
#include <string>

namespace gcs {

// Key material was read or used after secure erasure.
struct ErasedKeyError : std::logic_error {
    using std::logic_error::logic_error;
};

// Authenticated decryption failed: wrong key or mangled ciphertext.
struct DecryptFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownUser : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownNode : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegreeExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DuplicateUser : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AlreadyMember : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotMember : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Join was requested for a user with no out-of-band individual key.
struct NoIndividualKey : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotSynchronized : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A state machine received a message for the wrong virtual time.
struct StaleState : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BadN : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownMember : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The challenge oracle may be queried once per game.
struct AlreadyTested : std::logic_error {
    using std::logic_error::logic_error;
};

struct ParseError : std::runtime_error {
    int line;
    ParseError(int line_no, const std::string& what)
        : std::runtime_error("line " + std::to_string(line_no) + ": " + what), line(line_no) {}
};

// Event not valid for the selected scheme family.
struct SchemeMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A checked protocol invariant failed; the run aborts with exit code 2.
struct InvariantViolation : std::logic_error {
    using std::logic_error::logic_error;
};

struct WireError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace gcs
