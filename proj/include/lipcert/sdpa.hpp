#pragma once

#include <string>

#include "lipcert/conic.hpp"

namespace lipcert {

/// Serializes the problem in SDPA sparse format (.dat-s). Matrix blocks come
/// first; scalar rows become diagonal slots of one trailing diagonal block
/// (equalities as +/- slot pairs). A maximized objective is negated so the
/// file always encodes a minimization. Entries are emitted in a canonical
/// order with full "%.17g" precision, so equal problems serialize to equal
/// bytes.
std::string export_sdpa(const ConicProblem& problem);

void write_sdpa(const ConicProblem& problem, const std::string& path);

/// Parses SDPA sparse format. Diagonal slots are reconstructed as scalar
/// inequality rows, positive-size blocks as matrix blocks, and the objective
/// is kept as a minimization. A file produced by export_sdpa parses back to a
/// problem that serializes to identical bytes. `origin` names the source in
/// error messages.
ConicProblem parse_sdpa(const std::string& text, const std::string& origin = "<string>");

ConicProblem import_sdpa(const std::string& path);

}  // namespace lipcert
