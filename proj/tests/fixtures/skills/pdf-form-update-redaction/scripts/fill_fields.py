import sys
print("filled", len(sys.argv) - 1, "arguments")
