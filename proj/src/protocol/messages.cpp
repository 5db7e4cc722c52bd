#include "qdb/messages.hpp"

namespace qdb {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string bit_string(const Bits& bits) {
  std::string s;
  s.reserve(bits.size());
  for (Bit b : bits) s.push_back(b ? '1' : '0');
  return s;
}

std::string hex_prefix(const Commitment& c) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  for (std::size_t i = 0; i < 8; ++i) {
    s.push_back(kHex[c.digest[i] >> 4]);
    s.push_back(kHex[c.digest[i] & 0xF]);
  }
  return s;
}

}  // namespace

std::string_view kind_name(const WireMessage& msg) {
  return std::visit(Overloaded{
                        [](const NonceMsg&) { return std::string_view("nonce"); },
                        [](const CommitMsg&) { return std::string_view("commit"); },
                        [](const ChallengeBit&) { return std::string_view("challenge-bit"); },
                        [](const ResponseBit&) { return std::string_view("response-bit"); },
                        [](const QubitMsg&) { return std::string_view("qubit"); },
                        [](const EprHalf&) { return std::string_view("epr-half"); },
                        [](const FinalReveal&) { return std::string_view("final-reveal"); },
                    },
                    msg);
}

std::string payload_summary(const WireMessage& msg) {
  return std::visit(
      Overloaded{
          [](const NonceMsg& m) { return "bits=" + std::to_string(m.nonce.bits.size()); },
          [](const CommitMsg& m) { return "digest=" + hex_prefix(m.commitment); },
          [](const ChallengeBit& m) { return "c=" + std::to_string(m.value); },
          [](const ResponseBit& m) { return "r=" + std::to_string(m.value); },
          [](const QubitMsg& m) { return "handle=" + std::to_string(m.qubit.id); },
          [](const EprHalf& m) {
            return "handle=" + std::to_string(m.qubit.id) + " pair=" + std::to_string(m.qubit.pair_id);
          },
          [](const FinalReveal& m) {
            return "m'=" + bit_string(m.m_prime) + " r=" + bit_string(m.r);
          },
      },
      msg);
}

const QuantumHandle* carried_qubit(const WireMessage& msg) {
  if (const auto* q = std::get_if<QubitMsg>(&msg)) return &q->qubit;
  if (const auto* e = std::get_if<EprHalf>(&msg)) return &e->qubit;
  return nullptr;
}

}  // namespace qdb
