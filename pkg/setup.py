#!/usr/bin/env python3
"""
InvarLab - Setup Script
Installs dependencies and checks the installation
"""

import subprocess
import sys


def print_banner():
    """Print setup banner"""
    print("=" * 60)
    print("🔬 InvarLab - Setup & Installation")
    print("=" * 60)
    print("Setting up the stochastic invariance verification toolkit...")
    print()


def check_python_version():
    """Check if Python version is compatible"""
    if sys.version_info < (3, 9):
        print("❌ Error: Python 3.9 or higher is required")
        print(f"Current version: {sys.version}")
        return False

    print(f"✅ Python version: {sys.version.split()[0]}")
    return True


def install_dependencies():
    """Install Python dependencies"""
    print("\n📦 Installing Python dependencies...")

    try:
        subprocess.check_call([sys.executable, "-m", "pip", "install", "-r", "requirements.txt"])
        print("✅ Python dependencies installed successfully")
        return True

    except subprocess.CalledProcessError as e:
        print(f"❌ Error installing dependencies: {e}")
        return False


def test_installation():
    """Import every module and run one small property suite"""
    print("\n🧪 Testing installation...")

    try:
        from run_orchestrator import OpsVerifier

        report = OpsVerifier(trials=10).run(['penrose'])
        if report['verdict'] != 'pass':
            print("❌ Penrose suite reported violations")
            return False

        print("✅ All modules imported successfully")
        return True

    except Exception as e:
        print(f"❌ Installation test failed: {e}")
        return False


def print_success_message():
    """Print success message with next steps"""
    print("\n" + "=" * 60)
    print("🎉 InvarLab Setup Complete!")
    print("=" * 60)
    print()
    print("🚀 To check a bundled configuration:")
    print("   python app.py check --config configs/cir_invariant.json")
    print()
    print("🧮 To run the built-in property suites:")
    print("   python app.py verify-ops")
    print()
    print("📊 Exit codes: 0 pass, 1 fail, 2 inconclusive, 64 config error")
    print("=" * 60)


def main():
    """Main setup function"""
    print_banner()

    if not check_python_version():
        sys.exit(1)

    if not install_dependencies():
        print("\n❌ Setup failed during dependency installation")
        sys.exit(1)

    if not test_installation():
        print("\n⚠️  Setup completed with warnings. Some checks may not work properly.")

    print_success_message()


if __name__ == "__main__":
    main()
