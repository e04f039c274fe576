package results

func StructRet() struct{ A int } {
	return struct{ A int }{A: 1}
}

func IfaceRet() interface{} {
	return nil
}

func Named() (x int, err error) {
	return 0, nil
}

func FuncRet() func() int {
	return func() int { return 1 }
}

func ChanRet() <-chan struct{} {
	return make(chan struct{})
}

func IfaceMethods() interface {
	M() int
} {
	return nil
}

func MapRet() map[string]struct{} { return map[string]struct{}{} }
