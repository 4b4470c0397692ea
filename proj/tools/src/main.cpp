// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
int main() { return 0; }
