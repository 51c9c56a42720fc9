import sys
print("fields:", sys.argv[1:] or "none")
