#pragma once

// Kernel-gradient variable and interaction selection.

#include "kgvs/common.hpp"
#include "kgvs/gradients.hpp"
#include "kgvs/interaction.hpp"
#include "kgvs/kernel.hpp"
#include "kgvs/krr.hpp"
#include "kgvs/selection.hpp"
#include "kgvs/simgen.hpp"
