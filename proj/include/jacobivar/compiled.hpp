#pragma once

// Flat postfix tape for fast repeated evaluation of expression trees.
// Symbols are resolved to environment slots once, at compile time; the
// integrators then evaluate thousands of small trees per step without
// touching strings or maps. Domain violations surface as non-finite
// values and are caught by the divergence guard downstream.

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "jacobivar/expr.hpp"

namespace jacobivar {

class CompiledExpr {
 public:
  CompiledExpr() = default;

  static CompiledExpr compile(const ExprPtr& e, const std::map<std::string, int>& slots) {
    CompiledExpr c;
    c.emit(e, slots);
    int depth = 0;
    for (const auto& in : c.tape_) {
      depth += in.op == kConst || in.op == kSlot ? 1 : in.op <= kPow ? -1 : 0;
      if (depth > c.max_depth_) c.max_depth_ = depth;
    }
    if (c.max_depth_ > kStackCap)
      throw std::runtime_error("expression too deep to compile");
    return c;
  }

  double eval(const double* env) const {
    double stack[kStackCap];
    int top = -1;
    for (const auto& in : tape_) {
      switch (in.op) {
        case kAdd: --top; stack[top] += stack[top + 1]; break;
        case kSub: --top; stack[top] -= stack[top + 1]; break;
        case kMul: --top; stack[top] *= stack[top + 1]; break;
        case kDiv: --top; stack[top] /= stack[top + 1]; break;
        case kPow: --top; stack[top] = std::pow(stack[top], stack[top + 1]); break;
        case kConst: stack[++top] = in.value; break;
        case kSlot: stack[++top] = env[in.slot]; break;
        case kNeg: stack[top] = -stack[top]; break;
        case kSin: stack[top] = std::sin(stack[top]); break;
        case kCos: stack[top] = std::cos(stack[top]); break;
        case kTan: stack[top] = std::tan(stack[top]); break;
        case kExp: stack[top] = std::exp(stack[top]); break;
        case kLog: stack[top] = std::log(stack[top]); break;
        case kSqrt: stack[top] = std::sqrt(stack[top]); break;
        case kSquare: stack[top] *= stack[top]; break;
      }
    }
    return stack[0];
  }

  bool empty() const { return tape_.empty(); }

 private:
  // Binary ops first; the depth scan above relies on that ordering.
  enum Op : std::uint8_t {
    kAdd, kSub, kMul, kDiv, kPow,
    kConst, kSlot, kNeg, kSin, kCos, kTan, kExp, kLog, kSqrt, kSquare,
  };
  static constexpr int kStackCap = 128;

  struct Instr {
    Op op;
    int slot = 0;
    double value = 0.0;
  };

  void emit(const ExprPtr& e, const std::map<std::string, int>& slots) {
    switch (e->kind) {
      case NodeKind::Constant:
        tape_.push_back({kConst, 0, e->value});
        return;
      case NodeKind::Symbol: {
        auto it = slots.find(e->name);
        if (it == slots.end())
          throw std::runtime_error("no slot for symbol '" + e->name + "'");
        tape_.push_back({kSlot, it->second, 0.0});
        return;
      }
      case NodeKind::Unary:
        emit(e->args[0], slots);
        tape_.push_back({kNeg});
        return;
      case NodeKind::Binary:
        emit(e->args[0], slots);
        if (e->bop == BinaryOp::Pow && is_const(e->args[1], 2.0)) {
          tape_.push_back({kSquare});
          return;
        }
        emit(e->args[1], slots);
        switch (e->bop) {
          case BinaryOp::Add: tape_.push_back({kAdd}); break;
          case BinaryOp::Sub: tape_.push_back({kSub}); break;
          case BinaryOp::Mul: tape_.push_back({kMul}); break;
          case BinaryOp::Div: tape_.push_back({kDiv}); break;
          case BinaryOp::Pow: tape_.push_back({kPow}); break;
        }
        return;
      case NodeKind::Call:
        emit(e->args[0], slots);
        if (e->name == "sin") tape_.push_back({kSin});
        else if (e->name == "cos") tape_.push_back({kCos});
        else if (e->name == "tan") tape_.push_back({kTan});
        else if (e->name == "exp") tape_.push_back({kExp});
        else if (e->name == "log") tape_.push_back({kLog});
        else if (e->name == "sqrt") tape_.push_back({kSqrt});
        else throw std::runtime_error("cannot compile function '" + e->name + "'");
        return;
    }
  }

  std::vector<Instr> tape_;
  int max_depth_ = 0;
};

}  // namespace jacobivar
