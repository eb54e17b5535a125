#pragma once

#include "erpgeo/egomotion.hpp"
#include "erpgeo/error.hpp"
#include "erpgeo/gradcheck.hpp"
#include "erpgeo/losses.hpp"
#include "erpgeo/metrics.hpp"
#include "erpgeo/oracle.hpp"
#include "erpgeo/pointcloud.hpp"
#include "erpgeo/pose.hpp"
#include "erpgeo/ransac.hpp"
#include "erpgeo/sphere.hpp"
#include "erpgeo/synth.hpp"
#include "erpgeo/tracks.hpp"
#include "erpgeo/volume.hpp"
