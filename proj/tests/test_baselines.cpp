/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#include <doctest.h>
