#pragma once

#include "ktrunc/catalog.hpp"
#include "ktrunc/dirichlet.hpp"
#include "ktrunc/liouville.hpp"
#include "ktrunc/verify.hpp"
