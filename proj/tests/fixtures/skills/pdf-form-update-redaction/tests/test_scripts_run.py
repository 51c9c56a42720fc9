import subprocess
import sys

for script in ("scripts/inspect_fields.py", "scripts/fill_fields.py", "scripts/redact.py"):
    result = subprocess.run([sys.executable, script], capture_output=True, text=True)
    assert result.returncode == 0, (script, result.stderr)
print("ok")
