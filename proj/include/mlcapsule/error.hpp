#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mlcapsule {

enum class ErrorCode {
    None = 0,
    // generic
    InvalidArgument,
    ParseError,
    SchemaError,
    // iee
    HandleNotFound,
    ProgramError,
    // crypto / sealing
    IntegrityFailure,
    IdentityMismatch,
    TruncatedBlob,
    ChunkOutOfOrder,
    // inference
    ShapeMismatch,
    DivergenceError,
    BudgetExceeded,
    // protocol
    NoKey,
    UnknownCommand,
    QuoteInvalid,
    TagMismatch,
    TransportError,
    // guard
    QuotaExceeded,
    RollbackDetected,
    BadSignature,
    TicketReused,
    DigestMismatch,
    StorageUnavailable,
    // defenses
    InputRejected,
    StealingSuspected,
};

std::string_view error_name(ErrorCode code);

// Process exit code for the CLI; stable, documented in the README.
int error_exit_code(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::string(error_name(code)) + ": " + message),
          code_(code),
          message_(std::move(message)) {}

    ErrorCode code() const { return code_; }
    const std::string& message() const { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

// Raised by HwInstance::run when the loaded program itself fails; keeps the
// program's own error so protocol layers can surface it verbatim.
class ProgramError : public Error {
public:
    ProgramError(ErrorCode inner, std::string message)
        : Error(ErrorCode::ProgramError, std::string(error_name(inner)) + ": " + message),
          inner_(inner),
          inner_message_(std::move(message)) {}

    ErrorCode inner() const { return inner_; }
    const std::string& inner_message() const { return inner_message_; }

    // Rethrows the wrapped failure as a plain Error.
    [[noreturn]] void unwrap() const { throw Error(inner_, inner_message_); }

private:
    ErrorCode inner_;
    std::string inner_message_;
};

}  // namespace mlcapsule
