#include <array>
#include <string>

#include "qdb/errors.hpp"
#include "qdb/harness.hpp"

namespace qdb {

namespace {

constexpr std::array<Bit, 2> kBits{0, 1};
constexpr std::array<Basis, 2> kBases{Basis::Computational, Basis::Hadamard};
constexpr double kNegligible = 1e-15;

struct Outcome {
  Bit bit;
  double p;
};

std::array<Outcome, 2> outcomes(const PureState1& s, Basis basis) {
  const auto [p0, p1] = distribution1(s, basis);
  return {Outcome{0, p0}, Outcome{1, p1}};
}

class Enumerator {
 public:
  explicit Enumerator(BellLabel bell) : bell_(bell) {}

  void add(const RoundAssignment& vars, double weight, bool success) {
    if (weight > kNegligible) out_.push_back(OracleBranch{vars, weight, success});
  }
  Bit flip(Basis basis) const { return same_basis_flip(bell_, basis); }
  PureState2 pair() const { return bell_state(bell_); }
  std::vector<OracleBranch> take() { return std::move(out_); }

 private:
  BellLabel bell_;
  std::vector<OracleBranch> out_;
};

// Verifier keeps slot First; slot Second travels to the prover.
void eqdb_oneway(Enumerator& en, StrategyId attack) {
  for (Bit a : kBits) {
    for (Bit b : kBits) {
      const Basis ba = basis_from_bit(a);
      const Basis bb = basis_from_bit(b);
      RoundAssignment v;
      v.a = a;
      v.b = b;
      v.challenge_basis = ba;
      v.response_basis = bb;
      const double w0 = 0.25;

      switch (attack) {
        case StrategyId::HonestBaseline:
          for (const auto& pb : collapse_half(en.pair(), Slot::Second, ba)) {
            for (const auto& m : outcomes(pb.sibling, ba)) {
              const Bit expected = static_cast<Bit>(m.bit ^ en.flip(ba));
              for (const auto& d : outcomes(encode(pb.outcome, bb), bb)) {
                RoundAssignment x = v;
                x.challenge = expected;
                en.add(x, w0 * pb.probability * m.p * d.p, d.bit == expected);
              }
            }
          }
          break;
        case StrategyId::DistanceFraudReflect:
          for (const auto& loc : collapse_half(en.pair(), Slot::First, ba)) {
            const Bit expected = static_cast<Bit>(loc.outcome ^ en.flip(ba));
            for (const auto& d : outcomes(loc.sibling, bb)) {
              RoundAssignment x = v;
              x.challenge = expected;
              en.add(x, w0 * loc.probability * d.p, d.bit == expected);
            }
          }
          break;
        case StrategyId::DistanceFraudGuess:
          for (Bit g : kBits) {
            for (Basis gb : kBases) {
              for (const auto& loc : collapse_half(en.pair(), Slot::First, ba)) {
                const Bit expected = static_cast<Bit>(loc.outcome ^ en.flip(ba));
                for (const auto& d : outcomes(encode(g, gb), bb)) {
                  RoundAssignment x = v;
                  x.challenge = expected;
                  x.guess_bit = g;
                  x.guess_basis = gb;
                  en.add(x, w0 * 0.25 * loc.probability * d.p, d.bit == expected);
                }
              }
            }
          }
          break;
        case StrategyId::MafiaPreAsk:
          for (Bit g : kBits) {
            for (Basis gb : kBases) {
              // The prover measures the forged particle in a_i and answers in b_i.
              for (const auto& mp : outcomes(encode(g, gb), ba)) {
                for (const auto& loc : collapse_half(en.pair(), Slot::First, ba)) {
                  const Bit expected = static_cast<Bit>(loc.outcome ^ en.flip(ba));
                  for (const auto& d : outcomes(encode(mp.bit, bb), bb)) {
                    RoundAssignment x = v;
                    x.challenge = expected;
                    x.guess_bit = g;
                    x.guess_basis = gb;
                    en.add(x, w0 * 0.25 * mp.p * loc.probability * d.p, d.bit == expected);
                  }
                }
              }
            }
          }
          break;
        case StrategyId::MafiaInterceptResend:
          for (Basis mb : kBases) {
            for (Basis rb : kBases) {
              for (const auto& e : collapse_half(en.pair(), Slot::Second, mb)) {
                for (const auto& m : outcomes(e.sibling, ba)) {
                  const Bit expected = static_cast<Bit>(m.bit ^ en.flip(ba));
                  for (const auto& d : outcomes(encode(e.outcome, rb), bb)) {
                    RoundAssignment x = v;
                    x.challenge = expected;
                    x.measure_basis = mb;
                    x.resend_basis = rb;
                    en.add(x, w0 * 0.25 * e.probability * m.p * d.p, d.bit == expected);
                  }
                }
              }
            }
          }
          break;
        default:
          throw InvalidArgument("no enumeration for this attack on the one-way entangled protocol");
      }
    }
  }
}

void qdb_prior(Enumerator& en, StrategyId attack) {
  for (Bit a : kBits) {
    for (Bit b : kBits) {
      for (Bit c : kBits) {
        const Basis ba = basis_from_bit(a);
        const Basis bb = basis_from_bit(b);
        RoundAssignment v;
        v.a = a;
        v.b = b;
        v.challenge = c;
        v.challenge_basis = ba;
        v.response_basis = bb;
        const double w0 = 0.125;
        const PureState1 sent = encode(c, ba);

        switch (attack) {
          case StrategyId::HonestBaseline:
            for (const auto& cp : outcomes(sent, ba)) {
              for (const auto& d : outcomes(encode(cp.bit, bb), bb)) en.add(v, w0 * cp.p * d.p, d.bit == c);
            }
            break;
          case StrategyId::DistanceFraudReflect:
            for (const auto& d : outcomes(sent, bb)) en.add(v, w0 * d.p, d.bit == c);
            break;
          case StrategyId::DistanceFraudGuess:
            for (Bit g : kBits) {
              for (Basis gb : kBases) {
                for (const auto& d : outcomes(encode(g, gb), bb)) {
                  RoundAssignment x = v;
                  x.guess_bit = g;
                  x.guess_basis = gb;
                  en.add(x, w0 * 0.25 * d.p, d.bit == c);
                }
              }
            }
            break;
          case StrategyId::MafiaPreAsk:
            for (Bit g : kBits) {
              for (Basis gb : kBases) {
                for (const auto& cp : outcomes(encode(g, gb), ba)) {
                  for (const auto& d : outcomes(encode(cp.bit, bb), bb)) {
                    RoundAssignment x = v;
                    x.guess_bit = g;
                    x.guess_basis = gb;
                    en.add(x, w0 * 0.25 * cp.p * d.p, d.bit == c);
                  }
                }
              }
            }
            break;
          case StrategyId::MafiaInterceptResend:
            for (Basis mb : kBases) {
              for (Basis rb : kBases) {
                for (const auto& e : outcomes(sent, mb)) {
                  for (const auto& d : outcomes(encode(e.bit, rb), bb)) {
                    RoundAssignment x = v;
                    x.measure_basis = mb;
                    x.resend_basis = rb;
                    en.add(x, w0 * 0.25 * e.p * d.p, d.bit == c);
                  }
                }
              }
            }
            break;
          default:
            throw InvalidArgument("no enumeration for this attack on the prior one-way protocol");
        }
      }
    }
  }
}

// PartyA keeps slot First and sends slot Second.
void eqdb_mutual(Enumerator& en, StrategyId attack) {
  for (Bit a : kBits) {
    for (Bit b : kBits) {
      for (Bit c : kBits) {
        for (Bit r : kBits) {
          const Basis ba = basis_from_bit(a);
          const Basis bb = basis_from_bit(b);
          const Basis bc = basis_from_bit(c);
          RoundAssignment v;
          v.a = a;
          v.b = b;
          v.c = c;
          v.r = r;
          const double w0 = 1.0 / 16.0;

          switch (attack) {
            case StrategyId::HonestBaseline:
              v.challenge_basis = bb;
              v.response_basis = bc;
              for (const auto& mp : collapse_half(en.pair(), Slot::Second, ba)) {
                for (const auto& m : outcomes(mp.sibling, ba)) {
                  for (const auto& d : outcomes(encode(static_cast<Bit>(mp.outcome ^ r), bb), bb)) {
                    const Bit r_prime = static_cast<Bit>(d.bit ^ m.bit ^ en.flip(ba));
                    for (const auto& rr : outcomes(encode(r_prime, bc), bc)) {
                      RoundAssignment x = v;
                      x.challenge = static_cast<Bit>(mp.outcome ^ r);
                      en.add(x, w0 * mp.probability * m.p * d.p * rr.p, rr.bit == r);
                    }
                  }
                }
              }
              break;
            case StrategyId::MutualFraudUnentangled:
              v.challenge_basis = bb;
              v.response_basis = bc;
              for (const auto& mp : outcomes(encode(0, ba), ba)) {
                // A reflects |m' xor r>_b unchanged; B decodes it in c.
                for (const auto& rr : outcomes(encode(static_cast<Bit>(mp.bit ^ r), bb), bc)) {
                  RoundAssignment x = v;
                  x.challenge = static_cast<Bit>(mp.bit ^ r);
                  en.add(x, w0 * mp.p * rr.p, rr.bit == r);
                }
              }
              break;
            case StrategyId::MafiaInterceptResend:
              // The adversary poses as B towards A with its own committed r~ (here r).
              v.challenge_basis = ba;
              v.response_basis = bb;
              for (Basis mb : kBases) {
                for (Basis rb : kBases) {
                  for (const auto& e : collapse_half(en.pair(), Slot::Second, mb)) {
                    for (const auto& m : outcomes(e.sibling, ba)) {
                      const Bit expected = static_cast<Bit>(m.bit ^ en.flip(ba));
                      for (const auto& d : outcomes(encode(static_cast<Bit>(e.outcome ^ r), rb), bb)) {
                        RoundAssignment x = v;
                        x.challenge = expected;
                        x.measure_basis = mb;
                        x.resend_basis = rb;
                        en.add(x, w0 * 0.25 * e.probability * m.p * d.p,
                               static_cast<Bit>(d.bit ^ r) == expected);
                      }
                    }
                  }
                }
              }
              break;
            case StrategyId::MafiaPreAsk:
              // The adversary pre-asks A with a forged step-5 qubit, then relays A's
              // particle to B and replays A's step-6 answer.
              v.challenge_basis = bb;
              v.response_basis = bc;
              for (Bit g : kBits) {
                for (Basis gb : kBases) {
                  for (const auto& m : collapse_half(en.pair(), Slot::First, ba)) {
                    for (const auto& d : outcomes(encode(g, gb), bb)) {
                      const Bit r_prime = static_cast<Bit>(d.bit ^ m.outcome ^ en.flip(ba));
                      for (const auto& mp : outcomes(m.sibling, ba)) {
                        for (const auto& rr : outcomes(encode(r_prime, bc), bc)) {
                          RoundAssignment x = v;
                          x.challenge = static_cast<Bit>(mp.bit ^ r);
                          x.guess_bit = g;
                          x.guess_basis = gb;
                          en.add(x, w0 * 0.25 * m.probability * d.p * mp.p * rr.p, rr.bit == r);
                        }
                      }
                    }
                  }
                }
              }
              break;
            default:
              throw InvalidArgument("no enumeration for this attack on the mutual protocol");
          }
        }
      }
    }
  }
}

void classical(Enumerator& en, ProtocolId protocol, StrategyId attack) {
  const bool hk = protocol == ProtocolId::HanckeKuhn;
  for (Bit a : kBits) {
    for (Bit b : kBits) {
      for (Bit c : kBits) {
        RoundAssignment v;
        v.a = a;  // Brands-Chaum: a carries the committed bit N_i
        v.b = b;
        v.challenge = c;
        const Bit expected = hk ? hancke_kuhn_response(c, a, b) : brands_chaum_response(a, c);
        const double w0 = 0.125;
        switch (attack) {
          case StrategyId::HonestBaseline:
            en.add(v, w0, true);
            break;
          case StrategyId::DistanceFraudGuess:
            for (Bit g : kBits) {
              RoundAssignment x = v;
              x.guess_bit = g;
              const Bit answer = hk && a == b ? a : g;
              en.add(x, w0 * 0.5, answer == expected);
            }
            break;
          case StrategyId::MafiaPreAsk:
            for (Bit g : kBits) {
              RoundAssignment x = v;
              x.guess_bit = g;
              const Bit answer = hk ? hancke_kuhn_response(g, a, b) : brands_chaum_response(a, g);
              en.add(x, w0 * 0.5, answer == expected);
            }
            break;
          default:
            throw InvalidArgument("no enumeration for this attack on a classical protocol");
        }
      }
    }
  }
}

}  // namespace

std::vector<OracleBranch> enumerate_round(ProtocolId protocol, StrategyId attack, BellLabel bell) {
  if (!supports(protocol, attack)) {
    throw InvalidArgument(std::string(to_string(attack)) + " is not defined against " +
                          std::string(to_string(protocol)));
  }
  Enumerator en(bell);
  switch (protocol) {
    case ProtocolId::BrandsChaum:
    case ProtocolId::HanckeKuhn: classical(en, protocol, attack); break;
    case ProtocolId::QdbPrior: qdb_prior(en, attack); break;
    case ProtocolId::EqdbOneWay: eqdb_oneway(en, attack); break;
    case ProtocolId::EqdbMutual: eqdb_mutual(en, attack); break;
  }
  return en.take();
}

double per_round_oracle(ProtocolId protocol, StrategyId attack, const OracleCondition& condition,
                        BellLabel bell) {
  double total = 0.0;
  double good = 0.0;
  for (const auto& br : enumerate_round(protocol, attack, bell)) {
    if (condition && !condition(br.vars)) continue;
    total += br.weight;
    if (br.success) good += br.weight;
  }
  if (total <= kNegligible) throw InvalidArgument("oracle condition selects no branch");
  return good / total;
}

double detection_oracle(StrategyId prover, BellLabel bell) {
  if (prover != StrategyId::HonestBaseline && prover != StrategyId::DistanceFraudReflect) {
    throw InvalidArgument("detection oracle covers the honest and reflecting provers");
  }
  const PureState2 pair = bell_state(bell);
  double equal = 0.0;
  for (Bit a : kBits) {
    for (Bit b : kBits) {
      for (Basis beta : kBases) {
        const double w0 = 0.125;
        const Bit f = same_basis_flip(bell, beta);
        if (prover == StrategyId::DistanceFraudReflect) {
          const auto joint = joint_distribution(pair, beta, beta);
          for (Bit u : kBits) equal += w0 * joint[u][u ^ f];
          continue;
        }
        for (const auto& mp : collapse_half(pair, Slot::Second, basis_from_bit(a))) {
          for (const auto& u : outcomes(mp.sibling, beta)) {
            for (const auto& w : outcomes(encode(mp.outcome, basis_from_bit(b)), beta)) {
              if (static_cast<Bit>(u.bit ^ f) == w.bit) equal += w0 * mp.probability * u.p * w.p;
            }
          }
        }
      }
    }
  }
  return equal;
}

OracleCondition preask_subcase(int k) {
  if (k < 1 || k > 4) throw InvalidArgument("pre-ask scenarios are numbered 1 to 4");
  return [k](const RoundAssignment& v) {
    const bool basis_ok = v.guess_basis && v.challenge_basis && *v.guess_basis == *v.challenge_basis;
    const bool bit_ok = v.guess_bit && v.challenge && *v.guess_bit == *v.challenge;
    switch (k) {
      case 1: return basis_ok && !bit_ok;
      case 2: return basis_ok && bit_ok;
      case 3: return !basis_ok && bit_ok;
      default: return !basis_ok && !bit_ok;
    }
  };
}

OracleCondition intercept_subcase(int k) {
  if (k < 1 || k > 4) throw InvalidArgument("intercept-resend scenarios are numbered 1 to 4");
  return [k](const RoundAssignment& v) {
    const bool measure_ok = v.measure_basis && v.challenge_basis && *v.measure_basis == *v.challenge_basis;
    const bool resend_ok = v.resend_basis && v.response_basis && *v.resend_basis == *v.response_basis;
    switch (k) {
      case 1: return measure_ok && resend_ok;
      case 2: return measure_ok && !resend_ok;
      case 3: return !measure_ok && resend_ok;
      default: return !measure_ok && !resend_ok;
    }
  };
}

OracleCondition registers_equal(bool equal_ab) {
  return [equal_ab](const RoundAssignment& v) { return (v.a == v.b) == equal_ab; };
}

OracleCondition registers_bc_equal(bool equal_bc) {
  return [equal_bc](const RoundAssignment& v) { return v.c && ((v.b == *v.c) == equal_bc); };
}

}  // namespace qdb
