#pragma once

#include <optional>
#include <string>

namespace bridgecat {

// Chemical element lookups backed by a static table (Z = 1..96).
// Covalent radii follow Cordero et al., Dalton Trans. 2008, 2832.

int max_tabulated_z();

// Throws std::invalid_argument for unknown symbols / out-of-range Z.
int symbol_to_z(const std::string& symbol);
const std::string& z_to_symbol(int z);

// Covalent radius in Angstrom.
double covalent_radius(int z);

// Experimental fcc lattice constant in Angstrom, when tabulated.
std::optional<double> fcc_lattice_constant(const std::string& symbol);

} // namespace bridgecat
