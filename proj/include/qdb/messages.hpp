#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "qdb/crypto.hpp"
#include "qdb/qstate.hpp"

namespace qdb {

struct NonceMsg {
  Nonce nonce;
};

struct CommitMsg {
  Commitment commitment;
};

struct ChallengeBit {
  Bit value = 0;
};

struct ResponseBit {
  Bit value = 0;
};

/// A single prepared qubit (challenge or response).
struct QubitMsg {
  QuantumHandle qubit;
};

/// One half of an entangled pair sent as a challenge.
struct EprHalf {
  QuantumHandle qubit;
};

/// Final-phase opening. For the mutual protocol: B's measurement string m',
/// the committed r and its salt. For Brands-Chaum: m_prime is empty and r is the
/// committed nonce N.
struct FinalReveal {
  Bits m_prime;
  Bits r;
  Salt salt{};
};

using WireMessage =
    std::variant<NonceMsg, CommitMsg, ChallengeBit, ResponseBit, QubitMsg, EprHalf, FinalReveal>;

std::string_view kind_name(const WireMessage& msg);
std::string payload_summary(const WireMessage& msg);

/// Handle carried by QubitMsg / EprHalf, if any.
const QuantumHandle* carried_qubit(const WireMessage& msg);

}  // namespace qdb
