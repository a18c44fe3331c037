#pragma once

#include "ckstab/numerics.hpp"
#include "ckstab/parallel.hpp"
#include "ckstab/model.hpp"
#include "ckstab/linstab.hpp"
#include "ckstab/branches.hpp"
#include "ckstab/dynamics.hpp"
#include "ckstab/io.hpp"
#include "ckstab/cli.hpp"
