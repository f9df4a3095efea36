// Placeholder; filled in once the pipeline modules exist.
int main() { return 0; }
