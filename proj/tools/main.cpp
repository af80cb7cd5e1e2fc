// Placeholder while the library is brought up; replaced by the real CLI.
int main() { return 0; }
