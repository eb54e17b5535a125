#include "erpgeo/app.hpp"

int main(int argc, char** argv) { return erpgeo::app::run(argc, argv); }
