print("redacted 0 regions")
