#include "mlcapsule/error.hpp"

namespace mlcapsule {

std::string_view error_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::None: return "None";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::HandleNotFound: return "HandleNotFound";
        case ErrorCode::ProgramError: return "ProgramError";
        case ErrorCode::IntegrityFailure: return "IntegrityFailure";
        case ErrorCode::IdentityMismatch: return "IdentityMismatch";
        case ErrorCode::TruncatedBlob: return "TruncatedBlob";
        case ErrorCode::ChunkOutOfOrder: return "ChunkOutOfOrder";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::DivergenceError: return "DivergenceError";
        case ErrorCode::BudgetExceeded: return "BudgetExceeded";
        case ErrorCode::NoKey: return "NoKey";
        case ErrorCode::UnknownCommand: return "UnknownCommand";
        case ErrorCode::QuoteInvalid: return "QuoteInvalid";
        case ErrorCode::TagMismatch: return "TagMismatch";
        case ErrorCode::TransportError: return "TransportError";
        case ErrorCode::QuotaExceeded: return "QuotaExceeded";
        case ErrorCode::RollbackDetected: return "RollbackDetected";
        case ErrorCode::BadSignature: return "BadSignature";
        case ErrorCode::TicketReused: return "TicketReused";
        case ErrorCode::DigestMismatch: return "DigestMismatch";
        case ErrorCode::StorageUnavailable: return "StorageUnavailable";
        case ErrorCode::InputRejected: return "InputRejected";
        case ErrorCode::StealingSuspected: return "StealingSuspected";
    }
    return "Unknown";
}

int error_exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::None: return 0;
        case ErrorCode::InvalidArgument: return 2;
        case ErrorCode::ParseError: return 3;
        case ErrorCode::SchemaError: return 4;
        case ErrorCode::HandleNotFound: return 5;
        case ErrorCode::ProgramError: return 6;
        case ErrorCode::IntegrityFailure: return 7;
        case ErrorCode::IdentityMismatch: return 8;
        case ErrorCode::TruncatedBlob: return 9;
        case ErrorCode::ChunkOutOfOrder: return 10;
        case ErrorCode::ShapeMismatch: return 11;
        case ErrorCode::DivergenceError: return 12;
        case ErrorCode::BudgetExceeded: return 13;
        case ErrorCode::NoKey: return 14;
        case ErrorCode::UnknownCommand: return 15;
        case ErrorCode::QuoteInvalid: return 16;
        case ErrorCode::TagMismatch: return 17;
        case ErrorCode::TransportError: return 18;
        case ErrorCode::QuotaExceeded: return 19;
        case ErrorCode::RollbackDetected: return 20;
        case ErrorCode::BadSignature: return 21;
        case ErrorCode::TicketReused: return 22;
        case ErrorCode::DigestMismatch: return 23;
        case ErrorCode::StorageUnavailable: return 24;
        case ErrorCode::InputRejected: return 25;
        case ErrorCode::StealingSuspected: return 26;
    }
    return 1;
}

}  // namespace mlcapsule
